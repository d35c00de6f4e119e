"""
Linear versus quadratic cost
============================

Times the linear form and the explicit-weights form with one BLAS thread
and fits the slope of log time against log N. A slope near 1 means linear
cost and a slope near 2 means quadratic cost.
"""

from cogfuse import bench

lin, lin_slopes = bench.run_bench([1024, 2048, 4096, 8192, 16384], methods=["linear"])
quad, quad_slopes = bench.run_bench([256, 512, 1024, 2048, 4096], methods=["quadratic"])

for r in lin + quad:
    print(f"{r.method:9s} N={r.n_keys:6d}  {r.median_wall_time * 1e3:9.3f} ms")

print(f"linear slope    {lin_slopes[0].slope:.2f}")
print(f"quadratic slope {quad_slopes[0].slope:.2f}")

t_lin = next(r.median_wall_time for r in lin if r.n_keys == 4096)
t_quad = next(r.median_wall_time for r in quad if r.n_keys == 4096)
print(f"speedup at N=4096: {t_quad / t_lin:.0f}x")

# the records serialise to CSV with the fitted slopes as trailing comments
print(bench.write_csv(lin[:2], lin_slopes))
