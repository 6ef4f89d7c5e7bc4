from enum import StrEnum


class ActivationKind(StrEnum):
    """
    Choices for elementwise activations.
    """

    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    TANH = "tanh"


class Phase(StrEnum):
    """
    Choices for the training phase.
    """

    PHASE1 = "phase1"
    PHASE2 = "phase2"


class PathKind(StrEnum):
    """
    Choices for the rendering path a metric record refers to.
    """

    BICUBIC = "bicubic"
    DETERMINISTIC = "deterministic"
    STOCHASTIC_ORACLE = "stochastic-oracle"
    ICAP_MEAN = "icap-mean"
    ICAP_SAMPLE = "icap-sample"


class InferMode(StrEnum):
    """
    Choices for the inference latent.
    """

    MEAN = "mean"
    SAMPLE = "sample"
    DETERMINISTIC = "deterministic"


class Study(StrEnum):
    """
    Choices for the evaluation studies.
    """

    BENCHMARK = "benchmark"
    SAMPLING = "sampling"
    TRAVERSAL = "traversal"
    RESIDUAL = "residual"


class Split(StrEnum):
    """
    Choices for the dataset split tag.
    """

    TRAIN = "train"
    EVAL = "eval"
