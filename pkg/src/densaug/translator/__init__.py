from .cyclegan import (
    CycleGanTranslator,
    TrainLog,
    TranslatorConfig,
    train_cyclegan,
    translate,
)
from .losses import adversarial_loss, combine_objective, cycle_loss, full_objective
from .networks import PatchDiscriminator, ResidualBlock, ResnetGenerator
from .registry import ModelKey, ModelRegistry, build_registry, plan_registry

__all__ = [
    "CycleGanTranslator",
    "TrainLog",
    "TranslatorConfig",
    "train_cyclegan",
    "translate",
    "adversarial_loss",
    "combine_objective",
    "cycle_loss",
    "full_objective",
    "PatchDiscriminator",
    "ResidualBlock",
    "ResnetGenerator",
    "ModelKey",
    "ModelRegistry",
    "build_registry",
    "plan_registry",
]
