"""Score packet sequences against per-sender transition profiles.

A sender's history builds a stochastic matrix of SD-label transitions.  A
new sequence is compared under two hypotheses: generated from that profile,
or exchangeable draws from an unknown Dirichlet-distributed label vector.
Positive weight of evidence (log Bayes factor) flags anomalous traffic.
"""
import numpy as np

from nettomo import (
    DirichletParams,
    PacketSequence,
    TransitionProfile,
    bayes_factor,
    update_profile,
)

rng = np.random.default_rng(3)
states = ("a->b", "a->c", "b->c", "c->a")
k = len(states)

# historical behaviour: the sender mostly alternates a->b with b->c
history_probs = np.array(
    [
        [0.05, 0.10, 0.80, 0.05],
        [0.30, 0.10, 0.30, 0.30],
        [0.70, 0.10, 0.05, 0.15],
        [0.60, 0.20, 0.10, 0.10],
    ]
)

profile = TransitionProfile.empty(states, sender_id="10.0.0.9", smoothing=0.5)
for _ in range(20):  # fold in twenty historical sequences
    ev = [int(rng.integers(0, k))]
    for _ in range(80):
        ev.append(int(rng.choice(k, p=history_probs[ev[-1]])))
    profile = update_profile(profile, PacketSequence(events=np.array(ev)))

print("learned transition profile:")
print(np.round(profile.probs, 2))

alpha = DirichletParams(alpha=np.ones(k))


def score(seq, label):
    bf, woe = bayes_factor(seq, profile, alpha)
    verdict = "ANOMALY" if woe > 0 else "normal"
    print(f"  {label:<28} woe = {woe:8.2f}  -> {verdict}")


print("\nscoring fresh sequences (weight of evidence = log BF):")
for trial in range(3):
    ev = [int(rng.integers(0, k))]
    for _ in range(60):
        ev.append(int(rng.choice(k, p=history_probs[ev[-1]])))
    score(PacketSequence(events=np.array(ev)), f"profile-like traffic #{trial+1}")

# an attacker hammering one SD pair with occasional noise
for trial in range(3):
    q = np.array([0.91, 0.03, 0.03, 0.03])
    ev = np.concatenate([[0], rng.choice(k, size=60, p=q)])
    score(PacketSequence(events=ev), f"one-target flood #{trial+1}")
