"""Tour of the bit-exact fixed-point model.

A value in Q(I,F) is a signed two's-complement integer of width 1+I+F
denoting raw * 2**-F. Overflow either wraps (like the C model's integer
arithmetic) or saturates; rescaling after multiply/divide either truncates
toward negative infinity (arithmetic shift) or rounds to nearest-even.
"""

from qnnv.fixedpoint import (
    FxpConfig,
    FxpValue,
    float_to_fxp,
    fxp_add,
    fxp_div,
    fxp_mult,
)

cfg = FxpConfig(4, 4)  # Q(4,4): width 9, range [-16, 15.9375]
print(f"Q(4,4): width={cfg.width} bits, range [{cfg.value_min}, {cfg.value_max}]")
print(f"one quantum = 2^-4 = {cfg.quantum}")

# conversion rounds to nearest-even by default
for x in (1.5, 0.1, -0.3, 3.14159):
    v = float_to_fxp(x, cfg)
    print(f"  {x:8} -> raw {v.raw:4d}  denotes {v.value}")

# arithmetic is exact integer work under the hood
a = float_to_fxp(1.5, cfg)
b = float_to_fxp(0.5, cfg)
print(f"\n1.5 + 0.5 = {fxp_add(a, b).value}")
print(f"1.5 * 0.5 = {fxp_mult(a, b).value}")
print(f"1.5 / 0.5 = {fxp_div(a, b).value}")

# wrap vs saturate at the top of the range
top = FxpValue(cfg.raw_max, cfg)
one = float_to_fxp(1.0, cfg)
wrapped = fxp_add(top, one)
print(f"\nwrap: {top.value} + 1.0 = {wrapped.value} (raw {wrapped.raw})")

sat_cfg = FxpConfig(4, 4, overflow="sat")
sat_top = FxpValue(sat_cfg.raw_max, sat_cfg)
sat_one = float_to_fxp(1.0, sat_cfg)
clamped = fxp_add(sat_top, sat_one)
print(f"saturate: {sat_top.value} + 1.0 = {clamped.value} (raw {clamped.raw})")

# rescale rounding matters: 0.1875^2 = 0.03515625, below one quantum
tn = FxpConfig(4, 4, rounding="tn")
rne = FxpConfig(4, 4, rounding="rne")
for mode_cfg, label in ((tn, "truncate"), (rne, "round-nearest-even")):
    v = FxpValue(3, mode_cfg)  # 0.1875
    print(f"0.1875^2 under {label}: {fxp_mult(v, v).value}")
