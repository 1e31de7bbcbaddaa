from .inputs import AugmentedInput, TrainingInstance, build_augmented_input, make_training_instances
from .model import PhrasenessConfig, PhrasenessModel, phraseness_step
from .train import TrainResult, TrainSchedule, TrainingDivergedError, train
from .vocab import TagVocabulary, Vocabularies, Vocabulary

__all__ = [
    "AugmentedInput",
    "PhrasenessConfig",
    "PhrasenessModel",
    "TagVocabulary",
    "TrainResult",
    "TrainSchedule",
    "TrainingDivergedError",
    "TrainingInstance",
    "Vocabularies",
    "Vocabulary",
    "build_augmented_input",
    "make_training_instances",
    "phraseness_step",
    "train",
]
