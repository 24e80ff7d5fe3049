"""Integer statistics over a fixed sample."""

def moving_sum(count):
    total = 0
    for tick in range(1, 11):
        total += tick
    return total + count

def bounded(value, floor, ceiling):
    clipped = value
    if clipped < floor:
        clipped = floor
    if clipped > ceiling:
        clipped = ceiling
    return clipped

print(moving_sum(0))
print(bounded(120, 0, 100))
print(bounded(-5, 0, 100))
print(bounded(42, 0, 100))
