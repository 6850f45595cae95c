"""Step-by-step TOPSIS on the fixed 3x5 matrix used in test_topsis.cpp.

Plain float arithmetic, no numpy; the printed closeness values are frozen
into the C++ tests.
"""
import math

matrix = [
    [0.92, 0.88, 3.5, 0.95, 0.81],
    [0.75, 0.91, 12.0, 0.97, 0.70],
    [0.60, 0.52, 45.0, 0.99, 0.55],
]
weights = [0.15, 0.40, 0.15, 0.15, 0.15]
benefit = [True, True, False, True, True]

rows, cols = len(matrix), len(matrix[0])
wsum = sum(weights)
norms = [math.sqrt(sum(matrix[i][j] ** 2 for i in range(rows))) for j in range(cols)]
v = [[matrix[i][j] / norms[j] * (weights[j] / wsum) for j in range(cols)] for i in range(rows)]
ideal = [max(v[i][j] for i in range(rows)) if benefit[j] else min(v[i][j] for i in range(rows)) for j in range(cols)]
anti = [min(v[i][j] for i in range(rows)) if benefit[j] else max(v[i][j] for i in range(rows)) for j in range(cols)]
for i in range(rows):
    dp = math.sqrt(sum((v[i][j] - ideal[j]) ** 2 for j in range(cols)))
    dm = math.sqrt(sum((v[i][j] - anti[j]) ** 2 for j in range(cols)))
    print(repr(dm / (dp + dm)))
