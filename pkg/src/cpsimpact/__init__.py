"""Safe sets and impact metrics for cyber-physical systems under stealthy
data-poisoning attacks constrained by attack-pattern graphs."""

__version__ = "0.1.0"
