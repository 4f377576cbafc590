class PinwheelError(Exception):
    pass


class ScheduleFormatError(PinwheelError, ValueError):
    pass


class NoThresholdError(PinwheelError):
    pass


class InvalidWitnessError(PinwheelError):
    pass


class IndeterminateError(PinwheelError):

    def __init__(self, message, states=0):
        super().__init__(message)
        self.states = states


class FamilySpecError(PinwheelError, ValueError):
    pass


class CampaignError(PinwheelError):
    pass


class MissingTableEntryError(PinwheelError, KeyError):

    def __init__(self, table_id, key):
        super().__init__(f"no entry for {key} in table {table_id}")
        self.table_id = table_id
        self.key = key

    def __str__(self):
        return self.args[0]


class TableBuildError(PinwheelError):
    pass
