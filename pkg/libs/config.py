import logging
import os
import sys

# Get the directory of the calling script
caller_dir = os.path.dirname(os.path.abspath(sys.argv[0])) if sys.argv and sys.argv[0] else os.getcwd()

# ---- Group enumeration ----
GROUP_CAP = 200_000          # largest Cayley group we are willing to enumerate

# ---- Search caps ----
CYCLE_CAP = 6                # default n for coset-cycle searches
PATH_CAP = 6                 # default cap for coset-path searches

# ---- Closure measurements ----
MEASURE_F_EXHAUSTIVE = 2000  # exhaustive measure_f up to this many candidate sets
MEASURE_F_SAMPLES = 200      # sampled candidate sets beyond that
F_HAT_SAFETY = 2             # multiplier applied to measured closure sizes

# ---- Game gates ----
GATE_ACYCLICITY = 3          # verified coset acyclicity required before an upgrade run
GATE_RICHNESS = 2            # richness required before an upgrade run
REPLAY_SAMPLES = 50          # sampled spoiler lines for three-round replays

# ---- Reproducibility ----
DEFAULT_SEED = 0

# ---- Workers ----
DEFAULT_THREADS = os.cpu_count() or 1

_SETTINGS_NAMES = (
    "GROUP_CAP", "CYCLE_CAP", "PATH_CAP", "MEASURE_F_EXHAUSTIVE",
    "MEASURE_F_SAMPLES", "F_HAT_SAFETY", "GATE_ACYCLICITY", "GATE_RICHNESS",
    "REPLAY_SAMPLES", "DEFAULT_SEED", "DEFAULT_THREADS",
)

# Attempt to import site overrides from the caller's directory
try:
    # Temporarily add caller's directory to sys.path
    sys.path.append(caller_dir)
    import epistemia_settings as _site
except ImportError:
    logging.debug(f"No epistemia_settings in {caller_dir}, using defaults.")
    _site = None
finally:
    # Clean up sys.path to avoid side effects
    if caller_dir in sys.path:
        sys.path.remove(caller_dir)

if _site is not None:
    for _name in _SETTINGS_NAMES:
        if hasattr(_site, _name):
            globals()[_name] = int(getattr(_site, _name))


def _env_int(name):
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        logging.warning(f"Ignoring {name}={raw!r}: not an integer.")
        return None


def group_cap():
    """Element cap for Cayley enumeration, EPISTEMIA_GROUP_CAP taking precedence."""
    value = _env_int("EPISTEMIA_GROUP_CAP")
    return value if value is not None and value > 0 else GROUP_CAP


def worker_count(requested=None):
    """
    Number of workers for a pool.

    Args:
        requested (int, optional): Upper bound asked for by the caller.

    Returns:
        int: min(EPISTEMIA_THREADS or DEFAULT_THREADS, requested), at least 1.
    """
    limit = _env_int("EPISTEMIA_THREADS")
    if limit is None or limit < 1:
        limit = DEFAULT_THREADS
    if requested is not None:
        limit = min(limit, requested)
    return max(1, limit)


def describe():
    """Current effective settings, for reports."""
    return {
        "group_cap": group_cap(),
        "cycle_cap": CYCLE_CAP,
        "path_cap": PATH_CAP,
        "measure_f_exhaustive": MEASURE_F_EXHAUSTIVE,
        "measure_f_samples": MEASURE_F_SAMPLES,
        "f_hat_safety": F_HAT_SAFETY,
        "gate_acyclicity": GATE_ACYCLICITY,
        "gate_richness": GATE_RICHNESS,
        "replay_samples": REPLAY_SAMPLES,
        "seed": DEFAULT_SEED,
        "settings_module": _site is not None,
    }
