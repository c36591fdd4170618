"""Print the Gaussian moments of the built-in nonlinearities and the derived
label/feature variances for a tanh teacher with a ReLU random-features student."""
from doubledescent import nonlinearity as nl
from doubledescent.config import StudentSpec, TeacherSpec

for name in nl.available():
    s = nl.activation_stats(name)
    print(f"{name:>6}: <phi>={s.mean:.6f}  <phi^2>={s.second_moment:.6f}  "
          f"<phi'>={s.mean_derivative:.6f}  delta={s.delta:.6f}")

teacher = TeacherSpec.from_snr(10, f="tanh")
student = StudentSpec(arch="rnlfm", phi="relu")
print(nl.derived_variances(teacher, student))
print(f"noise variance for SNR 10: {teacher.sigma_eps2:.6f}")
