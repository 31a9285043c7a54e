"""Synthetic inertial windows written in the UCI HAR directory layout.

Used for tests and demos when the real dataset is not at hand. Every subject
gets its own sensor mounting rotation, cadence, gain and posture angles, so a
model trained on some subjects transfers imperfectly to others, which is the
situation personalization is meant to fix.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .har import CHANNELS, N_SUBJECTS, WINDOW_LENGTH, HarDataset

RATE_HZ = 50.0
# subjects that the original release places in its test part
TEST_SUBJECTS = (2, 4, 9, 10, 12, 13, 18, 20, 24)


def _rotation(axis, angle):
    axis = axis / np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * k @ k


def _subject_profile(rng, heterogeneity):
    return {
        "mount": _rotation(rng.normal(size=3), np.deg2rad(rng.normal(0, 12 * heterogeneity))),
        "cadence": rng.uniform(1.6, 2.1),
        "gain": rng.uniform(0.75, 1.3),
        "harmonic": rng.uniform(0.05, 0.2),
        "sit_tilt": np.deg2rad(rng.uniform(12, 32)),
        "stand_tilt": np.deg2rad(rng.uniform(-6, 10)),
        "lay_tilt": np.deg2rad(rng.uniform(-15, 15)),
        "noise": rng.uniform(0.01, 0.03),
    }


def _gravity(tilt):
    # x is vertical when upright; tilting leans toward z
    return np.array([np.cos(tilt), 0.0, np.sin(tilt)])


def _window(label, prof, rng):
    t = np.arange(WINDOW_LENGTH) / RATE_HZ
    phase = rng.uniform(0, 2 * np.pi)
    amp = prof["gain"] * rng.uniform(0.9, 1.1)
    body = np.zeros((3, WINDOW_LENGTH))
    gyro = np.zeros((3, WINDOW_LENGTH))
    if label in (1, 2, 3):
        f = prof["cadence"] * rng.uniform(0.97, 1.03) * {1: 1.0, 2: 0.85, 3: 1.12}[label]
        w = 2 * np.pi * f * t + phase
        vert, fwd, harm = {1: (0.25, 0.10, 1.0), 2: (0.18, 0.20, 0.6), 3: (0.38, 0.08, 2.0)}[label]
        body[0] = amp * (vert * np.sin(w) + prof["harmonic"] * harm * np.sin(2 * w + 0.7))
        if label == 3:
            body[0] += amp * 0.12 * np.sin(3 * w + 0.3)
        body[1] = amp * 0.07 * np.sin(0.5 * w)
        body[2] = amp * fwd * np.sin(w + np.pi / 2)
        gyro[0] = amp * {1: 0.15, 2: 0.45, 3: 0.25}[label] * np.sin(w + 0.4)
        gyro[1] = amp * 0.6 * np.sin(0.5 * w)
        gyro[2] = amp * 0.35 * np.sin(w + 1.0)
        grav = _gravity({1: 0.0, 2: np.deg2rad(8), 3: np.deg2rad(-5)}[label] + prof["stand_tilt"])
    else:
        tilt = {4: prof["sit_tilt"], 5: prof["stand_tilt"]}.get(label)
        if label == 6:
            grav = np.array([np.sin(prof["lay_tilt"]) * 0.3, 0.25, np.cos(prof["lay_tilt"])])
            grav /= np.linalg.norm(grav)
        else:
            grav = _gravity(tilt + rng.normal(0, np.deg2rad(1.5)))
        sway = 0.01 * np.sin(2 * np.pi * rng.uniform(0.2, 0.5) * t + phase)
        body += sway
        gyro += 0.5 * sway
    noise = prof["noise"]
    body += rng.normal(0, noise, body.shape)
    gyro += rng.normal(0, 2 * noise, gyro.shape)
    m = prof["mount"]
    body, gyro = m @ body, m @ gyro
    total = body + (m @ grav)[:, None]
    return np.concatenate([body, gyro, total])


def make_synthetic_har(total_windows=10_299, subjects=None, seed=0, heterogeneity=1.0):
    """Generate a dataset with roughly equal windows per subject and per activity."""
    subjects = list(range(1, N_SUBJECTS + 1)) if subjects is None else sorted(subjects)
    rng = np.random.default_rng(seed)
    base, extra = divmod(total_windows, len(subjects))
    X, y, s = [], [], []
    for i, subj in enumerate(subjects):
        prof = _subject_profile(np.random.default_rng([seed, subj]), heterogeneity)
        n = base + (1 if i < extra else 0)
        labels = np.resize(np.arange(1, 7), n)
        rng.shuffle(labels)
        for label in labels:
            X.append(_window(int(label), prof, rng))
            y.append(label)
            s.append(subj)
    return HarDataset(np.array(X), np.array(y), np.array(s))


def write_uci_layout(ds: HarDataset, root):
    """Write ``ds`` in the UCI HAR on-disk format (train/test chosen by subject)."""
    root = Path(root)
    in_test = np.isin(ds.subjects, TEST_SUBJECTS)
    for part, mask in (("train", ~in_test), ("test", in_test)):
        base = root / part
        (base / "Inertial Signals").mkdir(parents=True, exist_ok=True)
        np.savetxt(base / f"y_{part}.txt", ds.y[mask], fmt="%d")
        np.savetxt(base / f"subject_{part}.txt", ds.subjects[mask], fmt="%d")
        for c, name in enumerate(CHANNELS):
            np.savetxt(base / "Inertial Signals" / f"{name}_{part}.txt", ds.X[mask, c, :], fmt="%.8e")
    return root
