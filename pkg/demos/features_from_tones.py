"""
Spectral features from a tone sequence
======================================

Build a short melody, take its STFT and look at the log-mel and chroma
views of the same frames.
"""

import numpy as np

from duotok import dsp, synth

# %%
# Four quarter-second notes: A3, C#4, E4 and A4.
notes = [220.0, 277.18, 329.63, 440.0]
w = synth.tone_sequence(notes, 0.25)
spec = dsp.stft(w)
print("frames:", spec.values.shape[0], "at", spec.frame_rate, "Hz")

# %%
# Log-mel: the loudest band climbs with each note.
fb = dsp.mel_filterbank(w.sample_rate, 1024, n_mels=64)
lm = dsp.log_mel(spec, fb)
mid = [12, 37, 62, 87]  # one frame in the middle of each note
print("peak mel band per note:", lm[mid].argmax(axis=1).tolist())

# %%
# Chroma folds octaves together, so A3 and A4 land in the same class.
names = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"]
C = dsp.chroma(dsp.stft(w, dsp.StftConfig(4096, 240)))
print("pitch class per note:", [names[i] for i in C[mid].argmax(axis=1)])

# %%
# The mel L1 distance is what reconstruction quality is reported in.
noisy = dsp.Waveform(w.samples + 0.01 * np.random.default_rng(0).standard_normal(w.samples.size), w.sample_rate)
print("mel L1 to a noisy copy: %.3f" % dsp.mel_l1(lm, dsp.log_mel(dsp.stft(noisy), fb)))
