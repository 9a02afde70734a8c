#!/usr/bin/env python3
# Weight and FLOP audit across array sizes: closed-form estimates, walked
# counts, and the percentage reductions of the structured net over the dense
# baseline.  Two accountings are shown side by side on purpose; they disagree
# by a few percent and the residual column keeps that visible.

from dvmbeam.complexity import reduction_report, write_reduction_csv, write_reduction_json

report = reduction_report(ns=(8, 16, 32, 64))

print(f"{'n':>4} {'depth':>6} {'params S/D':>14} {'Pr(w)':>7} "
      f"{'flops formula':>14} {'counted':>8} {'dense':>8} {'Pr(f)':>7} {'resid':>7}")
for r in report["rows"]:
    print(f"{r['n']:>4} {r['depth']:>6} "
          f"{r['params_structured']:>6}/{r['params_dense']:<7} "
          f"{r['pr_weights_pct']:>6.1f}% "
          f"{r['flops_formula_total']:>14} {r['flops_counted_total']:>8} "
          f"{r['flops_dense_total']:>8} {r['pr_flops_pct']:>6.1f}% "
          f"{r['counted_vs_formula_pct']:>+6.1f}%")

print("\ncounting conventions:")
for key, text in report["conventions"].items():
    print(f"  {key:18s} {text}")

write_reduction_csv(report, "reduction_report.csv")
write_reduction_json(report, "reduction_report.json")
print("\nwrote reduction_report.csv and reduction_report.json")
