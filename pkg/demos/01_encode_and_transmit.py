"""Walk one message through the transmitter and the channel.

Run with ``python3 demos/01_encode_and_transmit.py``.
"""
# %%
import numpy as np

from fasura import generate_codebook, polar_spec_from_config, smoke_config
from fasura.channel import draw_channel, sigma2_from_ebn0, transmit
from fasura.codebook import phi
from fasura.transmitter import encode_message, split_message

cfg = smoke_config()
cb = generate_codebook(cfg)
spec = polar_spec_from_config(cfg)
print(f"J = {cfg.J} columns, n = {cfg.n} channel uses ({cfg.n_p} pilot + {cfg.T} symbols x {cfg.L} chips)")

# %% The first B_f bits pick a codebook column; the rest are polar coded.
rng = np.random.default_rng(0)
m = rng.integers(0, 2, cfg.B, dtype=np.uint8)
m_f, m_s = split_message(m, cfg.B_f)
j = phi(m_f) - 1
print("column", j, "| payload bits", m_s.size, "| info+CRC bits", spec.B_c, "| code length", spec.n_c)

# %% Every codeword has unit energy, split between pilot and payload.
x = encode_message(m, cb, spec)
pilot_energy = np.sum(np.abs(x[: cfg.n_p]) ** 2)
print(f"||x||^2 = {np.sum(np.abs(x) ** 2):.15f}  (pilot share {pilot_energy:.4f} = n_p/n)")

# %% Each payload chunk is one QPSK symbol times that column's spreading sequence.
chunks = x[cfg.n_p:].reshape(cfg.T, cfg.L) / cb.spreading(j)
print("first symbols:", np.round(chunks[:4, 0], 6))

# %% Superimpose a few users through Rayleigh fading.
K, ebn0_db = 4, 3.0
msgs = rng.integers(0, 2, (K, cfg.B), dtype=np.uint8)
X = np.stack([encode_message(mm, cb, spec) for mm in msgs], axis=1)
sigma2 = sigma2_from_ebn0(ebn0_db, cfg.B)
obs, Z = transmit(X, draw_channel(rng, K, cfg.M, sigma2), rng, cfg.n_p)
print(f"Y is {obs.Y.shape}; sigma^2 = {sigma2:.4g}; noise energy {np.sum(np.abs(Z) ** 2):.2f} "
      f"vs expected {cfg.n * cfg.M * sigma2:.2f}")
