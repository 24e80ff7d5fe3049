"""Inventory window reporting."""

def read_window(values, start):
    # collect a fixed-width slice of the inventory window
    result = []
    for offset in range(0, 4):
        result.append(values[start + offset])
    return result

def total_units(a, b):
    subtotal = a + b
    return subtotal

stock = [3, 9, 27, 81, 243, 729]
window = read_window(stock, 1)
print(window)
print(total_units(10, 32))
