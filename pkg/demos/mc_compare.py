"""Compare Monte Carlo estimates with theory at a few points (under a minute).

The random-features points at M = 256 sit a few percent off the theory; that
gap shrinks roughly like 1/M as the sample count grows."""
from doubledescent import mc, theory
from doubledescent.config import StudentSpec, TeacherSpec, make_config

teacher = TeacherSpec.from_snr(10, f="tanh")
cases = [("linear", 0.5, None, 1e-6), ("linear", 2.0, None, 1e-6),
         ("rnlfm", 0.25, 0.5, 1e-6), ("rnlfm", 0.25, 2.0, 1e-6)]
for arch, af, ap, lam in cases:
    cfg = make_config(256, af, ap, teacher=teacher, student=StudentSpec(arch=arch, lam=lam),
                      replicates=200, seed=11)
    est = mc.run_decomposition(cfg, threads=4)
    th = theory.theory_for_config(cfg)
    print(f"{arch} alpha_f={cfg.shape.alpha_f:.3f} alpha_p={cfg.shape.alpha_p:.3f}")
    for q in ("train", "test", "bias2", "variance"):
        e = getattr(est, q)
        print(f"  {q:>8}: mc {e.mean:.4f} +- {e.stderr:.4f}  theory {getattr(th, q):.4f}")
