"""Independent backward-Euler reference for the two-inductor circuits.

Writes the circuit equations by hand (no shared code with the Rust
assembler) and prints states in the crate's variable order, for freezing
into crates/rasdi/tests/oracle.rs.
"""
import numpy as np

ORDER = ["i1", "i3", "v1", "e1", "e2", "e3", "er", "i2", "i4", "i5", "i6"]


def system(l1, l2, c, g, l1_to_ground):
    ix = {name: k for k, name in enumerate(ORDER)}
    n = len(ORDER)
    rows = []  # (coefficients of z, differential?, forcing(t))
    l1_neg = "er" if l1_to_ground else "e2"

    def row(coef, diff=False, f=lambda t: 0.0):
        r = np.zeros(n)
        for name, v in coef.items():
            r[ix[name]] += v
        rows.append((r, diff, f))

    w = 2 * np.pi * 50.0
    row({"e1": -1 / l1, l1_neg: 1 / l1}, diff="i1")
    row({"e2": -1 / l2, "er": 1 / l2}, diff="i3")
    row({"i4": -1 / c}, diff="v1")
    # KCL with element currents leaving their first terminal. The second
    # circuit uses the ground node in place of e1 (any n-1 nodes suffice).
    if l1_to_ground:
        row({"i1": -1, "i6": -1, "i3": -1})
        row({"i2": -1, "i3": 1, "i4": -1})
    else:
        row({"i1": 1, "i2": 1, "i5": 1})
        row({"i1": -1, "i2": -1, "i3": 1, "i4": -1})
    row({"i4": 1, "i5": -1, "i6": 1})
    row({"er": 1})
    row({"e1": g, "e2": -g, "i2": -1})
    row({"v1": 1, "e3": -1, "e2": 1})
    row({"e1": 1, "e3": -1}, f=lambda t: np.cos(w * t))
    row({"i6": -1}, f=lambda t: -1e-3 * np.sin(w * t))
    return rows


def backward_euler(rows, dt, steps):
    n = len(ORDER)
    ix = {name: k for k, name in enumerate(ORDER)}
    z = np.zeros(n)
    out = []
    for j in range(1, steps + 1):
        t = j * dt
        m = np.zeros((n, n))
        rhs = np.zeros(n)
        for r, (coef, diff, f) in enumerate(rows):
            if diff:
                # d(var)/dt + coef . z = 0
                m[r] = dt * coef
                m[r, ix[diff]] += 1.0
                rhs[r] = z[ix[diff]]
            else:
                m[r] = coef
                rhs[r] = f(t)
        z = np.linalg.solve(m, rhs)
        out.append(z.copy())
    return out


if __name__ == "__main__":
    cases = {
        "ex1": (system(0.4, 0.5, 1e-6, 2e-3, False), 1.2e-3),
        "ex2": (system(0.5, 0.7, 1e-6, 2e-3, True), 4.5e-4),
    }
    for name, (rows, dt) in cases.items():
        traj = backward_euler(rows, dt, 50)
        for step in (1, 10, 50):
            vals = ", ".join(f"{v:.17e}" for v in traj[step - 1])
            print(f"{name} step {step}: [{vals}]")
