"""Built-in configurations addressable by name on the command line."""

DEFAULT = """\
# 16 x 16 x 8 box with walls, single-gyre surface forcing
[domain]
nx = 16
ny = 16
nz = 8
lateral_mode = physical

[forcing]
Tstar = gyre
Q = zero

[init]
T0 = zero

[time]
dt = 1e-3
t_end = 0.1
"""

# A meridional front tilted with depth under gyre forcing.  With the default
# hyper-diffusion the wall gradients stay bounded; with lambda = 0 the run
# diverges from the north-west corner within a few dozen steps.
BAROCLINIC = """\
[domain]
nx = 48
ny = 48
nz = 16
lateral_mode = physical

[physics]
lambda = 1e-4
K_h = 1e-2

[forcing]
Tstar = gyre
Q = zero

[init]
T0 = baroclinic(1.0, 0)

[time]
dt = 1.4e-4
t_end = 0.028
scheme = backward_euler_AB2

[output]
directory = pghd_compare
bl_width = 2
"""

PERIODIC = """\
# doubly periodic verification box (analytic oracles hold here)
[domain]
nx = 16
ny = 16
nz = 8
lateral_mode = periodic_test

[physics]
alpha = 0
beta = 0

[forcing]
Tstar = zero
Q = zero

[init]
T0 = random(7, 0.1, 3)

[time]
dt = 1e-3
t_end = 0.05
scheme = crank_nicolson_AB2
"""

PRESETS = {"default": DEFAULT, "baroclinic": BAROCLINIC, "periodic": PERIODIC}
