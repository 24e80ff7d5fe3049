"""Grade ledger with a small state machine."""

def classify(score):
    if score == 1:
        return "poor"
    elif score == 2:
        return "fair"
    else:
        return "good"

def tally(limit):
    total = 0
    index = 0
    while index < limit:
        if index % 2 == 0:
            total = total + index
        index = index + 1
    return total

print(classify(1))
print(classify(2))
print(classify(7))
print(tally(9))
