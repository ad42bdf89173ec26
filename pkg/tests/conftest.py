"""Shared pytest configuration."""
from hypothesis import HealthCheck, settings

# deterministic property tests: the suite doubles as an acceptance gate and
# must not flicker between runs
settings.register_profile(
    "suite",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")
