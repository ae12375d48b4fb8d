"""Walk one synthetic utterance through the feature extractors."""

import numpy as np

from specjoint import IbmConfig, StftConfig, compute_ibm, istft, lps, mel_bank, mfcc, stft
from specjoint.corpus import mix_at_snr
from specjoint.features import splice
from specjoint.synth import harmonic_voice, white_noise

# A one-second voiced signal and a noise bed to corrupt it with.
clean = harmonic_voice(1.0, f0=155.0, seed=3)
noise = white_noise(2.0, seed=4)
noisy, scaled = mix_at_snr(clean, noise, snr_db=5.0, noise_offset=1000)

config = StftConfig()
spec = stft(noisy, config)
print(f"signal: {len(noisy)} samples at {noisy.sample_rate} Hz")
print(f"stft: {spec.frames.shape[0]} frames x {spec.frames.shape[1]} bins")

# Log-power spectra are the regression domain; the inverse transform
# shows how much the analysis/synthesis chain loses on its own.
back = istft(spec, len(noisy))
interior = slice(config.frame_len, -config.frame_len)
err = np.linalg.norm(back.samples[interior] - noisy.samples[interior])
err /= np.linalg.norm(noisy.samples[interior])
print(f"roundtrip relative L2 error (interior): {err:.2e}")

features = lps(spec)
print(f"lps range: [{features.data.min():.1f}, {features.data.max():.1f}]")

# Cepstra add a smoothed spectral envelope; the final column is log-energy.
bank = mel_bank(n_mels=40, fft_size=config.fft_size, sample_rate=noisy.sample_rate)
cepstra = mfcc(spec, bank)
print(f"mfcc: {cepstra.data.shape[1]} dims per frame")

# The mask marks bins where speech power beats the scaled noise.
mask = compute_ibm(stft(clean, config), stft(scaled, config), IbmConfig())
print(f"ibm: {100 * mask.data.mean():.1f}% of bins speech-dominant at 5 dB")

# Splicing glues +-3 context frames onto each row for the network input.
rows = splice(features.data, tau=3)
print(f"spliced input rows: {rows.shape[0]} x {rows.shape[1]}")
