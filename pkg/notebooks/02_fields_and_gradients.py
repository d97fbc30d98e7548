"""
A neural distance field and its derivatives
============================================

The field starts out as an approximate sphere. Its input gradient gives
surface normals; training needs derivatives of that gradient with respect
to the weights, which the autodiff helpers provide.
"""
import numpy as np

from ifsdf import net
from ifsdf.autodiff import flatten, grad_params_of_input_gradient, grad_params_of_value
from ifsdf.net import geometric_init

field = geometric_init((64, 64, 64, 64), radius=0.5, rng_seed=0)

for q in ([0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.3, 0.3, 0.3]):
    s = net.eval(field, q)
    print(q, f"f={s.value:+.4f}", "sphere SDF", f"{np.linalg.norm(q) - 0.5:+.4f}", "grad", s.gradient.round(3))

# Analytic input gradient against central differences.
x = np.random.default_rng(0).uniform(-0.5, 0.5, (5, 3))
_, g = field.eval_points(x)
h = 1e-3
fd = np.stack([(field.values(x + h * e) - field.values(x - h * e)) / (2 * h) for e in np.eye(3)], 1)
print("max |grad - FD|:", np.abs(g - fd).max())

# Parameter gradients of f(q) and of c . grad_q f(q).
pv = grad_params_of_value(field, [0.2, 0.1, 0.0])
pg = grad_params_of_input_gradient(field, [0.2, 0.1, 0.0], [0.0, 0.0, 1.0])
print("|df/dtheta| =", float(flatten(pv).norm()), " |d(n_z)/dtheta| =", float(flatten(pg).norm()))
