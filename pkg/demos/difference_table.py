"""
Noise level from a difference table
===================================

Six noisy values of a smooth function, differenced up to fifth order.
"""

import numpy as np

from noiselevel import build_table, estimate_noise

values = [328.3654, 329.2947, 328.4099, 328.5886, 328.2965, 328.4134]

# forward differences, one column per order
table = build_table(values)
for k in range(1, table.max_order + 1):
    print(f"order {k}:", np.round(table.column(k), 4))

# the estimator picks the first order where three neighbours agree
est = estimate_noise(values)
print()
for o in est.per_order:
    flag = "*" if o.order == est.selected_order else " "
    print(f"{flag} k={o.order}  estimate={o.estimate:.4f}  relative={o.estimate / values[0]:.5f}")
print(f"\nstatus {est.status.value}, noise level {est.value:.4f}")
