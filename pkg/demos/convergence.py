"""h-convergence on structured cube meshes.

Solves -lap u = f on the unit cube with u = sin(pi x) cos(pi y) cos(pi z),
Dirichlet data on four sides and Neumann data on x = 0 and x = 1, then prints
the observed rates. Expect about k in H1 and k+1 in L2.
"""
from polyvem import build_structured_cube_mesh, convergence_rate, diffusion_problem, run_single

prob = diffusion_problem()
ladders = {1: (2, 4, 8), 2: (2, 4, 6)}

for k, ladder in ladders.items():
    recs = [run_single(build_structured_cube_mesh(n), k, prob)[0] for n in ladder]
    h = [r.h for r in recs]
    for r in recs:
        print(f"k={k}  h={r.h:.4f}  e_h1={r.e_h1:.3e}  e_l2={r.e_l2:.3e}")
    _, r1 = convergence_rate([r.e_h1 for r in recs], h)
    _, r0 = convergence_rate([r.e_l2 for r in recs], h)
    print(f"k={k}  overall rates: H1 {r1:.3f}  L2 {r0:.3f}\n")
