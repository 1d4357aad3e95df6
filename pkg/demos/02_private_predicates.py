"""Private predicates as key pairs: equality, comparison, interval containment.

A predicate like `age in [30, 40]` becomes two short keys. Each key alone is
pseudorandom; evaluated at the same public point, the two outputs XOR to the
predicate's truth value there. The servers therefore evaluate predicates by
position, without ever seeing the thresholds.
"""

import numpy as np

from oblivgm import fss

rng = np.random.default_rng(7)
domain = 64


def indicator(k1, k2):
    return (fss.full_domain_eval(k1, domain) ^ fss.full_domain_eval(k2, domain)).to_bits()


def render(bits):
    return "".join("#" if b else "." for b in bits)


k1, k2 = fss.dpf_gen(37, domain, rng)
print("x == 37      ", render(indicator(k1, k2)))
print("  key 1 alone", render(fss.full_domain_eval(k1, domain).to_bits()), "(noise)")

k1, k2 = fss.dcf_gen(20, domain, rng)
print("x <  20      ", render(indicator(k1, k2)))

k1, k2 = fss.cmp_gen("ge", 50, domain, rng)
print("x >= 50      ", render(indicator(k1, k2)))

i1, i2 = fss.ic_gen(30, 40, domain, rng)
print("30<=x<=40    ", render(indicator(i1, i2)))

blob = fss.serialize_key(i1)
eq_blob = fss.serialize_key(fss.dpf_gen(37, domain, rng)[0])
print(f"interval key: {len(blob)} bytes; equality key: {len(eq_blob)} bytes "
      f"(ratio {len(blob) / len(eq_blob):.2f}; an interval is two comparisons)")
