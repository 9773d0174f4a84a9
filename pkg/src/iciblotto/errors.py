"""Exception types. Each carries the tag of the module that raised it."""


class IciError(Exception):
    module = "iciblotto"

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class ModelError(IciError):
    module = "ici-model"


class EstimatorError(IciError):
    module = "estimator"


class AttackError(IciError):
    module = "attack-analysis"


class GameError(IciError):
    module = "blotto"


class ScenarioError(IciError):
    module = "sim-cli"
