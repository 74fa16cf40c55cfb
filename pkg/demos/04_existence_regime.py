"""
Pushing the feeder past its limit
=================================

Scale the loading up until no steady voltage profile exists. Both solvers
should fail loudly with a typed error rather than hand back a profile with
zero or negative voltage.
"""
import feederflow as ff
from feederflow.io import load_case

case = load_case("simple5km.json")
grid = ff.discretize(case.network, 0.002)
density = ff.coarse_grain(case.injections, ff.CoarseGrainSpec(0.05), grid, epsilon=0.1)
segment = case.network.segments[0]


def attempt(solver):
    try:
        prof = solver()
    except ff.FeederflowError as exc:
        return type(exc).__name__
    return f"v_min = {prof.v.min():.3f}"


# %%
for k in (1.0, 1.2, 1.4, 1.45, 1.5, 2.0, 5.0):
    scaled = density.scaled(k)
    newton = attempt(lambda: ff.solve_tpbv(case.network, scaled, grid))
    shooting = attempt(lambda: ff.shooting_oracle(segment, scaled, grid))
    print(f"load x{k:<5} Newton: {newton:<18} shooting: {shooting}")

# %%
# Below the limit the lowest voltage sags quickly: the nose of the
# power-voltage curve lies between 1.4 and 1.5 times the nominal loading.
