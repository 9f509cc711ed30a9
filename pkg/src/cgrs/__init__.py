"""Conformal group recommendation on association-mining statistics."""
from .conformal import ConformalOutput, p_value, p_values, recommend_cgrs, recommend_grs
from .corpus import Dataset, Interaction, UserProfile, build_profiles, load_dataset, parse_interactions, split_profiles
from .grouping import Group, VirtualProfile, build_virtual_profile, form_homogeneous_group, form_random_group
from .scoring import WeightedProfile, am_score, pm_score
from .stats import StatIndex, build_index, cond_prob, precedence_prob

__version__ = "0.1.0"
