"""Exception types raised across the package."""


class DatasetError(ValueError):
    pass


class MissingColumn(DatasetError):
    pass


class NegativeDemand(DatasetError):
    def __init__(self, series_id, row, value):
        self.series_id, self.row, self.value = series_id, row, value
        super().__init__(f"negative demand {value} for series {series_id!r} at row {row}")


class RaggedSeries(DatasetError):
    pass


class MissingValue(DatasetError):
    pass


class HorizonOverrun(DatasetError):
    pass


class ForecastError(ValueError):
    pass


class EmptyHistory(ForecastError):
    pass


class WindowTooLarge(ForecastError):
    pass


class DivergedTraining(RuntimeError):
    def __init__(self, epoch):
        self.epoch = epoch
        super().__init__(f"training loss became non-finite at epoch {epoch}")


class NonStationaryFitWarning(UserWarning):
    pass


class DimensionMismatch(ValueError):
    pass


class InfeasibleState(ValueError):
    pass


class NotOptimal(RuntimeError):
    pass


class TooFewPeriods(ValueError):
    pass


class ZeroDenominator(ZeroDivisionError):
    pass


class ZeroPIBound(ZeroDivisionError):
    pass


class InvalidConfig(ValueError):
    pass
