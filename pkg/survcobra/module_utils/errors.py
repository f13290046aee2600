# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

"""Exception hierarchy shared by the library and the command modules.

Every error carries a message and a free-form ``details`` dict. The command
layer turns them into a failure document and an exit code (``rc``).
"""


class SurvCobraError(Exception):
    """Base class for all errors raised by survcobra."""

    rc = 1

    def __init__(self, msg, **details):
        super(SurvCobraError, self).__init__(msg)
        self.msg = msg
        self.details = details

    def __str__(self):
        return self.msg


# user/input errors, exit code 2

class ParameterError(SurvCobraError):
    rc = 2


class DataFileError(SurvCobraError):
    rc = 2


class SchemaError(SurvCobraError):
    rc = 2


class ParseError(SurvCobraError):
    rc = 2

    def __init__(self, msg, row=None, column=None, **details):
        super(ParseError, self).__init__(msg, row=row, column=column, **details)
        self.row = row
        self.column = column


class ValidationError(SurvCobraError):
    rc = 2


# internal failures, exit code 1

class SplitError(SurvCobraError):
    pass


class DegenerateGridError(SurvCobraError):
    pass


class EstimationError(SurvCobraError):
    pass


class MetricError(SurvCobraError):
    pass


class DegenerateIntervalError(MetricError):
    pass


class FitError(SurvCobraError):
    pass


class PredictionError(SurvCobraError):
    pass


class DistanceError(SurvCobraError):
    pass


class NoNeighborsError(PredictionError):

    def __init__(self, msg, min_distances=None, **details):
        super(NoNeighborsError, self).__init__(msg, min_distances=min_distances, **details)
        self.min_distances = min_distances


class TuningError(SurvCobraError):

    def __init__(self, msg, fold=None, **details):
        super(TuningError, self).__init__(msg, fold=fold, **details)
        self.fold = fold
