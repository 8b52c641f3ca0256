"""Monte Carlo campaigns and the required-Eb/N0 search on the smoke preset.

The same calls at paper scale (``paper_config(K)``) reproduce the
required-Eb/N0-versus-K curve; expect hours rather than seconds.
"""
# %%
from fasura import find_required_ebn0, generate_codebook, run_campaign, smoke_config

cfg = smoke_config()
cb = generate_codebook(cfg)

# %% Error probabilities with Wilson 95% intervals.
for ebn0_db in (-6.0, -3.0, 0.0, 3.0):
    s, _ = run_campaign(cfg, ebn0_db, 30, cb)
    print(f"{ebn0_db:+.1f} dB  P_md {s.P_md:.3f}  P_fa {s.P_fa:.3f}  P_e {s.P_e:.3f}  "
          f"CI [{s.ci_e[0]:.3f}, {s.ci_e[1]:.3f}]")

# %% Bisection for the smallest Eb/N0 with P_e <= 0.05; points share trial seeds.
seen = []
req = find_required_ebn0(cfg, 0.05, 30, (-8.0, 6.0), tol_db=0.5, cb=cb,
                         on_point=lambda s, _: seen.append((s.ebn0_db, s.P_e)))
for e, pe in seen:
    print(f"  tried {e:+.3f} dB -> P_e {pe:.3f}")
print(f"required Eb/N0 ~ {req:.2f} dB")
