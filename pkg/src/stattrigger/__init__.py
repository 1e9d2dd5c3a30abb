"""Statistical-trigger dataset poisoning toolkit."""

from .tensor import Domain, ImageTensor, LabeledDataset, StdStats, standardize, to_grayscale
from .features import (
    StatFeatureConfig,
    Variant,
    distribution_audit,
    stat_value,
    stat_values,
    threshold_from_ratio,
)
from .activation import (
    ActivationParams,
    Direction,
    EscalationLog,
    activate_to_threshold,
    apply_standardization,
    apply_transform,
    suppress_below_threshold,
)
from .augment import AugKind, Augmentation, apply_augmentation
from .io import (
    DatasetFormat,
    DatasetManifest,
    export_dataset,
    load_cifar10,
    load_dataset,
    load_rawtensordump,
    save_cifar10,
    save_rawtensordump,
)
from .oracle import BuiltinLinearOracle, ClassifierOracle
from .plan import PlanAction, PlanEntry, PoisonPlan
from .poison_ci import CiPoisonConfig, poison_clean_image
from .poison_cl import (
    ClPoisonConfig,
    PgdParams,
    poison_clean_label,
    untargeted_pgd,
    verify_clean_label_plan,
)
from .protocol import RemoteOracle, resolve_oracle
from .robustness import (
    asr_under_augmentation,
    verify_masking_bound,
    verify_noise_shift,
)

__all__ = [
    "AugKind",
    "Augmentation",
    "BuiltinLinearOracle",
    "CiPoisonConfig",
    "ClPoisonConfig",
    "ClassifierOracle",
    "DatasetFormat",
    "DatasetManifest",
    "PgdParams",
    "PlanAction",
    "PlanEntry",
    "PoisonPlan",
    "RemoteOracle",
    "apply_augmentation",
    "asr_under_augmentation",
    "export_dataset",
    "load_cifar10",
    "load_dataset",
    "load_rawtensordump",
    "poison_clean_image",
    "poison_clean_label",
    "resolve_oracle",
    "save_cifar10",
    "save_rawtensordump",
    "untargeted_pgd",
    "verify_clean_label_plan",
    "verify_masking_bound",
    "verify_noise_shift",
    "ActivationParams",
    "Direction",
    "Domain",
    "EscalationLog",
    "ImageTensor",
    "LabeledDataset",
    "StatFeatureConfig",
    "StdStats",
    "Variant",
    "activate_to_threshold",
    "apply_standardization",
    "apply_transform",
    "distribution_audit",
    "standardize",
    "stat_value",
    "stat_values",
    "suppress_below_threshold",
    "threshold_from_ratio",
    "to_grayscale",
]
