"""Checksum walk over a fixed table."""

table = [5, 11, 17, 23]

def fold(seed):
    acc = seed
    acc = acc + table[0]
    acc = acc * 2
    acc = acc + table[3]
    return acc

def spread(width):
    low = 1
    high = 2
    mid = 3
    return low + high + mid + width

print(fold(7))
print(spread(4))
print(table[1] + table[2])
