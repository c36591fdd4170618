"""Ridge-less test error, bias^2 and variance against alpha_f for linear
regression, and against alpha_p for random ReLU features at alpha_f = 1/4."""
import numpy as np

from doubledescent import theory
from doubledescent.config import StudentSpec, TeacherSpec

teacher = TeacherSpec.from_snr(10, f="tanh")


def table(arch, points, constants):
    print(f"{'alpha_f':>8} {'alpha_p':>8} {'test':>10} {'bias2':>10} {'variance':>10}")
    for af, ap in points:
        r = theory.theory_point(arch, af, ap, constants)
        print(f"{af:8.3f} {ap:8.3f} {r.test:10.4f} {r.bias2:10.4f} {r.variance:10.4f}")


c_lin = theory.ModelConstants.from_specs(teacher, StudentSpec())
print("linear regression")
table("linear", [(a, a) for a in np.round(np.linspace(0.1, 3.0, 16), 3) if a != 1.0], c_lin)

c_rf = theory.ModelConstants.from_specs(teacher, StudentSpec(arch="rnlfm", phi="relu"))
print("\nrandom ReLU features, alpha_f = 0.25")
table("rnlfm", [(0.25, ap) for ap in (0.125, 0.25, 0.5, 0.8, 0.95, 1.05, 1.5, 2, 4, 8, 32)], c_rf)
