"""
Building weighted model classes
===============================

A model class is an ordered list of conditional models with prior
weights.  This walk-through builds the two kinds the package ships:
Gaussian regression lines with rational coefficients, and tabular
label predictors, then validates the class invariants.
"""

from fractions import Fraction

from mdlpredict import (
    ConstantTable,
    InputToken,
    ModelClass,
    TabularClassificationModel,
    build_linear_rational_class,
    rational_code_length,
    validate_class,
)

# a grid of lines y = a*x + b with shared noise sigma = 1;
# coefficients can be ints, floats, or exact rational strings
grid = [(0, 0), (1, 0), ("1/2", "1/2"), (-1, "3/4")]
uniform = build_linear_rational_class(grid, sigma=1.0)

print("uniform prior over", len(uniform), "lines")
for w, model in uniform.entries:
    f = model.mean_fn
    print(f"  w = {w:.4f}   y = {f.slope} * x + {f.intercept}")

# a code-length prior charges 2^-bits per coefficient pair, so simpler
# rationals get heavier weights; members are sorted heaviest first
coded = build_linear_rational_class(grid, sigma=1.0, prior="code-length")
print("\ncode-length prior (bits -> weight, heaviest first)")
for w, model in coded.entries:
    f = model.mean_fn
    bits = rational_code_length(Fraction(f.slope)) \
        + rational_code_length(Fraction(f.intercept))
    print(f"  {bits:2d} bits  w = {w:.4f}   y = {f.slope} * x + {f.intercept}")
print("weight sum:", coded.weight_sum)

# classification members carry a probability row per label
labels = ModelClass([
    (0.5, TabularClassificationModel(ConstantTable((0.7, 0.2, 0.1)), 3)),
    (0.3, TabularClassificationModel(ConstantTable((0.2, 0.6, 0.2)), 3)),
    (0.2, TabularClassificationModel(ConstantTable((1 / 3, 1 / 3, 1 / 3)), 3)),
])
print("\ntabular class labels per member:", labels.model(0).label_count)

# validate_class probes densities and integrals against the declared
# bound and weight budget at a handful of inputs
probes = [InputToken(v, t) for t, v in enumerate((-1.0, 0.0, 2.5), start=1)]
report = validate_class(uniform, probes)
print("\nvalidation:", "ok" if report.ok else "violations found")
print("  max density over probes:", round(float(report.max_density.max()), 6))
print("  weight sum:", report.weight_sum)
