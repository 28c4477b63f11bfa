"""Exception hierarchy shared across the pipeline."""


class RadstabError(Exception):
    """Base class for all radstab errors."""


# --- volume_io ---

class HeaderTooShort(RadstabError):
    pass


class BadMagic(RadstabError):
    pass


class UnsupportedDatatype(RadstabError):
    pass


class DimMismatch(RadstabError):
    pass


class NonFinitePayload(RadstabError):
    pass


class SidecarMissingKey(RadstabError):
    pass


class PayloadSizeMismatch(RadstabError):
    pass


class MaskNotBinary(RadstabError):
    pass


class DuplicateCaseId(RadstabError):
    pass


class MissingFile(RadstabError):
    pass


class LabeledWithoutSurvival(RadstabError):
    pass


# --- preprocess / seg_metrics / radiomics ---

class EmptyMask(RadstabError):
    pass


# --- stats ---

class TooFewSamples(RadstabError):
    pass


class ConstantInput(RadstabError):
    pass


class AllZeroDifferences(RadstabError):
    pass


class ConstantDifferences(RadstabError):
    pass


class DegenerateVariance(RadstabError):
    pass


class SingularWithinMatrix(RadstabError):
    pass


class MalformedRatings(RadstabError):
    pass


# --- dimred / models ---

class SupervisedWithoutLabels(RadstabError):
    pass


class NegativeInputForChiSquare(RadstabError):
    pass


class KTooLarge(RadstabError):
    pass


class ColumnMismatch(RadstabError):
    pass


class SingleClassTraining(RadstabError):
    pass


class NonFiniteInput(RadstabError):
    pass


class TooFewPerClass(RadstabError):
    pass


class NegativeSurvival(RadstabError):
    pass


class PoolOverlapsLabeled(RadstabError):
    pass


class PoolOverlapsExternal(RadstabError):
    pass


# --- phantom ---

class ErosionExtinction(RadstabError):
    pass
