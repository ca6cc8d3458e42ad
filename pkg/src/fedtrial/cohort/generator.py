"""Synthetic multi-center clopidogrel cohorts.

Each patient gets a pre-index history drawn from a center-specific mixture
over background codes, plus planted risk signal:

* presence risk codes, each with a fixed log-odds weight;
* order pairs ``(risk code A, mitigator M)`` that always occur together in
  separate visits. A before M lowers the log-odds by ``order_strength``;
  A itself adds ``order_strength / 2``. A multi-hot view sees both codes
  either way, so the pair carries no bag-of-codes signal on average, only
  a temporal one.

TF status is drawn from ``sigmoid(intercept + risk)`` with the intercept
solved so the expected TF share of labeled patients matches
``tf_fraction``. Post-index visits are then written so that the labeler
reproduces the drawn outcome; excluded patients get deliberately early
events, no prescription, or a negative visit day.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from ..errors import ConfigError
from ..records import (
    DIAGNOSIS, PRESCRIPTION, PROCEDURE, Code, PatientRecord, Visit,
)

CLOPIDOGREL_CODES = frozenset({Code(PRESCRIPTION, "0209000C0")})
TF_CODES = frozenset({
    Code(DIAGNOSIS, "I63.9"),
    Code(DIAGNOSIS, "I21.9"),
    Code(DIAGNOSIS, "T82.8"),
    Code(PROCEDURE, "K75.4"),
})

# shares of the excluded group, by reason
EXCLUSION_MIX = {"EARLY_EVENT": 0.6, "NO_PRESCRIPTION": 0.2, "INCONSISTENT_DATES": 0.2}


@dataclass
class GeneratorConfig:
    n_patients: int = 9867
    n_centers: int = 22
    center_decay: float = 0.75
    tf_fraction: float = 1824 / (1824 + 6859)
    excluded_fraction: float = 1184 / 9867
    n_diagnosis: int = 150
    n_procedure: int = 50
    n_prescription: int = 80
    n_risk_codes: int = 8
    n_order_pairs: int = 4
    risk_prevalence: float = 0.12
    pair_prevalence: float = 0.3
    order_strength: float = 4.0
    center_heterogeneity: float = 1.0
    mean_visits: float = 3.0
    seed: int = 0

    def validate(self):
        if self.n_patients < 1 or self.n_centers < 1:
            raise ConfigError("n_patients and n_centers must be positive")
        if self.n_patients < self.n_centers:
            raise ConfigError(f"cannot spread {self.n_patients} patients over {self.n_centers} centers")
        if not 0.0 < self.center_decay <= 1.0:
            raise ConfigError("center_decay must be in (0, 1]")
        for name in ("tf_fraction", "excluded_fraction", "risk_prevalence", "pair_prevalence"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must be in (0, 1), got {v}")
        if self.order_strength < 0 or self.center_heterogeneity < 0 or self.mean_visits <= 0:
            raise ConfigError("order_strength, center_heterogeneity must be >= 0 and mean_visits > 0")
        if self.n_diagnosis < self.n_risk_codes + self.n_order_pairs + 1:
            raise ConfigError("n_diagnosis too small for the requested risk codes")
        if self.n_prescription < self.n_order_pairs + 1 or self.n_procedure < 1:
            raise ConfigError("n_prescription/n_procedure too small")

    def to_dict(self) -> dict:
        return asdict(self)


def center_sizes(n_patients: int, n_centers: int, decay: float) -> np.ndarray:
    """Geometric size schedule normalized to ``n_patients`` (largest-remainder rounding)."""
    raw = decay ** np.arange(n_centers, dtype=np.float64)
    exact = n_patients * raw / raw.sum()
    sizes = np.floor(exact).astype(np.int64)
    short = n_patients - sizes.sum()
    order = np.argsort(-(exact - sizes), kind="stable")
    sizes[order[:short]] += 1
    if sizes.min() < 1:
        raise ConfigError(
            f"size schedule infeasible: decay {decay} leaves a center empty with {n_patients} patients")
    return sizes


def _tokens(system: str, n: int) -> list[str]:
    if system == DIAGNOSIS:
        # ICD-like: letter, two digits, dot, digit; skips the reserved TF tokens
        out = [f"{chr(ord('A') + (i // 100) % 26)}{i % 100:02d}.{i % 7}" for i in range(n * 2)]
    elif system == PROCEDURE:
        out = [f"{chr(ord('L') + (i // 100) % 10)}{i % 100:02d}.{i % 5 + 1}" for i in range(n * 2)]
    else:
        out = [f"{(i % 15) + 1:02d}{(i // 15) % 10:02d}0{chr(ord('A') + i % 26)}0" for i in range(n * 2)]
    reserved = {c.token for c in TF_CODES | CLOPIDOGREL_CODES}
    seen = []
    for t in out:
        if t not in reserved and t not in seen:
            seen.append(t)
        if len(seen) == n:
            break
    return seen


@dataclass
class _CodeBook:
    background: list[Code]
    risk: list[Code]
    risk_weights: np.ndarray
    pair_risk: list[Code]
    pair_mitigator: list[Code]
    filler_prescriptions: list[Code]


def _codebook(cfg: GeneratorConfig, rng) -> _CodeBook:
    diag = [Code(DIAGNOSIS, t) for t in _tokens(DIAGNOSIS, cfg.n_diagnosis)]
    proc = [Code(PROCEDURE, t) for t in _tokens(PROCEDURE, cfg.n_procedure)]
    presc = [Code(PRESCRIPTION, t) for t in _tokens(PRESCRIPTION, cfg.n_prescription)]
    diag_pick = rng.permutation(len(diag))
    presc_pick = rng.permutation(len(presc))
    risk = [diag[i] for i in diag_pick[:cfg.n_risk_codes]]
    pair_risk = [diag[i] for i in diag_pick[cfg.n_risk_codes:cfg.n_risk_codes + cfg.n_order_pairs]]
    pair_mit = [presc[i] for i in presc_pick[:cfg.n_order_pairs]]
    special = set(risk) | set(pair_risk) | set(pair_mit)
    background = [c for c in diag + proc + presc if c not in special]
    magnitudes = rng.uniform(0.6, 1.6, size=cfg.n_risk_codes)
    signs = np.where(np.arange(cfg.n_risk_codes) % 4 == 3, -1.0, 1.0)
    return _CodeBook(
        background=background,
        risk=risk,
        risk_weights=magnitudes * signs,
        pair_risk=pair_risk,
        pair_mitigator=pair_mit,
        filler_prescriptions=[c for c in presc if c not in special],
    )


def generate_cohort(config: GeneratorConfig | None = None) -> list[PatientRecord]:
    """Generate a labeled-by-construction synthetic cohort, deterministic in ``config.seed``."""
    cfg = config or GeneratorConfig()
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    book = _codebook(cfg, rng)
    C = cfg.n_centers
    sizes = center_sizes(cfg.n_patients, C, cfg.center_decay)
    center_ids = rng.permutation(C) + 1           # which id gets which size
    centers = np.repeat(center_ids, sizes)
    centers = centers[rng.permutation(cfg.n_patients)]

    # center-specific mixtures (non-IID)
    nb = len(book.background)
    popularity = 1.0 / (np.arange(nb) + 1.0) ** 0.8
    popularity = popularity[rng.permutation(nb)]
    het = cfg.center_heterogeneity
    mix = {}
    risk_prev = {}
    pair_prev = {}
    visit_rate = {}
    for c in range(1, C + 1):
        w = popularity * np.exp(het * rng.standard_normal(nb))
        mix[c] = w / w.sum()
        risk_prev[c] = np.clip(cfg.risk_prevalence * np.exp(0.5 * het * rng.standard_normal(cfg.n_risk_codes)), 0.01, 0.6)
        pair_prev[c] = np.clip(cfg.pair_prevalence * np.exp(0.3 * het * rng.standard_normal(cfg.n_order_pairs)), 0.02, 0.8)
        visit_rate[c] = cfg.mean_visits * np.exp(0.25 * het * rng.standard_normal())

    # pre-index histories and latent risk
    histories, index_days, risks = [], [], np.zeros(cfg.n_patients)
    for i in range(cfg.n_patients):
        c = int(centers[i])
        index_day = int(rng.integers(365, 1826))
        visits, risk = _history(rng, cfg, book, mix[c], risk_prev[c], pair_prev[c], visit_rate[c], index_day)
        histories.append(visits)
        index_days.append(index_day)
        risks[i] = risk

    # outcome assignment
    n_excl = int(round(cfg.excluded_fraction * cfg.n_patients))
    perm = rng.permutation(cfg.n_patients)
    excluded = np.zeros(cfg.n_patients, dtype=bool)
    excluded[perm[:n_excl]] = True
    reasons = np.array(list(EXCLUSION_MIX))
    reason_of = rng.choice(reasons, size=cfg.n_patients, p=list(EXCLUSION_MIX.values()))
    kept = risks[~excluded]
    intercept = brentq(lambda b: expit(b + kept).mean() - cfg.tf_fraction, -50.0, 50.0)
    is_tf = rng.random(cfg.n_patients) < expit(intercept + risks)

    width = len(str(cfg.n_patients))
    records = []
    tf_list = sorted(TF_CODES)
    clopi = sorted(CLOPIDOGREL_CODES)[0]
    for i in range(cfg.n_patients):
        visits = histories[i]
        d0 = index_days[i]
        outcome = reason_of[i] if excluded[i] else ("TF" if is_tf[i] else "CONTROL")
        index_codes = [clopi]
        if outcome == "NO_PRESCRIPTION":
            index_codes = [book.filler_prescriptions[int(rng.integers(len(book.filler_prescriptions)))]]
        visits.append(Visit(d0, index_codes, False))
        # routine post-index care, never with TF codes
        for _ in range(int(rng.poisson(1.5))):
            day = d0 + int(rng.integers(1, 731))
            visits.append(Visit(day, _sample_codes(rng, book, mix[int(centers[i])]), bool(rng.random() < 0.1)))
        tf_code = tf_list[int(rng.integers(len(tf_list)))]
        if outcome == "TF":
            visits.append(Visit(d0 + int(rng.integers(8, 366)), [tf_code], True))
        elif outcome == "EARLY_EVENT":
            visits.append(Visit(d0 + int(rng.integers(0, 8)), [tf_code], True))
            if rng.random() < 0.3:
                visits.append(Visit(d0 + int(rng.integers(8, 366)), [tf_code], True))
        elif outcome in ("CONTROL", "NO_PRESCRIPTION", "INCONSISTENT_DATES"):
            u = rng.random()
            if u < 0.15:     # follow-up visit for an old event: not through the ER
                visits.append(Visit(d0 + int(rng.integers(8, 366)), [tf_code], False))
            elif u < 0.25:   # event after the one-year window
                visits.append(Visit(d0 + int(rng.integers(366, 731)), [tf_code], True))
        visits.sort(key=lambda v: v.day)
        if outcome == "INCONSISTENT_DATES":
            visits[0] = Visit(-int(rng.integers(1, 31)), visits[0].codes, visits[0].er_flag)
        records.append(PatientRecord(f"P{i + 1:0{width}d}", int(centers[i]), visits))
    return records


def _sample_codes(rng, book: _CodeBook, mix: np.ndarray) -> list[Code]:
    k = 1 + int(rng.poisson(1.0))
    picks = rng.choice(len(book.background), size=k, p=mix)
    return [book.background[j] for j in dict.fromkeys(picks.tolist())]


def _history(rng, cfg, book, mix, risk_prev, pair_prev, visit_rate, index_day):
    has_risk = rng.random(cfg.n_risk_codes) < risk_prev
    has_pair = rng.random(cfg.n_order_pairs) < pair_prev
    protective = rng.random(cfg.n_order_pairs) < 0.5
    n_visits = 1 + int(rng.poisson(visit_rate))
    if has_pair.any():
        n_visits = max(n_visits, 2)
    n_visits = min(n_visits, index_day)
    days = np.sort(rng.choice(index_day, size=n_visits, replace=False))
    visits = [Visit(int(d), _sample_codes(rng, book, mix), False) for d in days]
    risk = 0.0
    for j in np.flatnonzero(has_risk):
        visits[int(rng.integers(n_visits))].codes.append(book.risk[j])
        risk += book.risk_weights[j]
    for j in np.flatnonzero(has_pair):
        first, second = np.sort(rng.choice(n_visits, size=2, replace=False))
        a, m = book.pair_risk[j], book.pair_mitigator[j]
        if protective[j]:
            visits[first].codes.append(a)
            visits[second].codes.append(m)
            risk += 0.5 * cfg.order_strength - cfg.order_strength
        else:
            visits[first].codes.append(m)
            visits[second].codes.append(a)
            risk += 0.5 * cfg.order_strength
    return visits, risk
