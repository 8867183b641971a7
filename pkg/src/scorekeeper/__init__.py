"""Scorekeeper effects on subjective box-score statistics.

Tracking-data ingestion, potential-assist extraction, the team-level ratio
model, the contextual penalized logistic model, effect isolation and a
synthetic-data generator with planted ground truth.
"""

__version__ = "0.1.0"
