# account balance walkthrough
opening = 1000
deposit = 250
withdrawal = 175

def apply_month(balance, inflow, outflow):
    adjusted = balance + inflow - outflow
    return adjusted

def monthly_fee(balance):
    fee = 12
    if balance < 500:
        fee = 25
    return fee

closing = apply_month(opening, deposit, withdrawal)
print(closing)
print(monthly_fee(closing))
print(monthly_fee(80))
