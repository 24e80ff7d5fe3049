# session label picker using match
def label_for(code):
    match code:
        case 1:
            return "guest"
        case 2:
            return "member"
        case _:
            return "unknown"

def shift_window(base):
    marker = 64
    moved = base + marker
    return moved

for code in [1, 2, 9]:
    print(label_for(code))
print(shift_window(6))
