"""Analytic kernel spectrum of random ReLU features against one sampled Gram matrix."""
from doubledescent import mc, spectra
from doubledescent.config import StudentSpec, make_config

cfg = make_config(512, 0.25, 2.0, student=StudentSpec(arch="rnlfm", phi="relu"))
dens = spectra.rnlfm_density(0.25, 2.0, cfg.student.stats.delta)
print(f"zero-eigenvalue fraction {dens.f_zero:.3f}; support {dens.support}")
emp = mc.eigen_histogram(cfg, n_matrices=2, bins=30, x_max=1.05 * dens.x_max)
masses = dens.bin_masses(emp.edges)
for lo, hi, f, a in zip(emp.edges[:-1], emp.edges[1:], emp.frequencies(), masses):
    print(f"[{lo:7.3f}, {hi:7.3f})  sampled {f:.4f}  analytic {a:.4f}")
print(f"total variation {mc.total_variation(emp, dens):.4f}")
print(f"sampled zero fraction {emp.zero_fraction:.3f}")
