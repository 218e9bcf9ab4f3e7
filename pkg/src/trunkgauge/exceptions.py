"""Exception hierarchy for trunkgauge."""


class TrunkGaugeError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(TrunkGaugeError, ValueError):
    pass


class InvalidModelError(TrunkGaugeError, ValueError):
    pass


class DegenerateDataError(TrunkGaugeError, ValueError):
    pass


class EmptyComponentError(TrunkGaugeError, ArithmeticError):
    """An M-step produced components with (near) zero responsibility mass."""

    def __init__(self, indices):
        self.indices = tuple(int(i) for i in indices)
        super().__init__(f"empty mixture components: {self.indices}")


class FitFailedError(TrunkGaugeError, RuntimeError):
    pass


class InsufficientTrainingDataError(TrunkGaugeError, ValueError):
    pass


class GeometryError(TrunkGaugeError):
    """Measurement failure. ``stage`` names the pipeline step that failed."""

    status = "geometry-error"

    def __init__(self, message, stage="geometry"):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


class PadsNotFoundError(GeometryError):
    status = "pads-not-found"

    def __init__(self, n_components, areas, min_area):
        self.n_components = n_components
        self.areas = tuple(int(a) for a in areas)
        self.min_area = min_area
        super().__init__(
            f"expected 2 pad components with area >= {min_area}, found "
            f"{n_components} component(s) with areas {list(self.areas)}",
            stage="extract",
        )


class AmbiguousAxisError(GeometryError):
    status = "ambiguous-axis"

    def __init__(self, ratio):
        self.ratio = ratio
        super().__init__(
            f"pad scatter is nearly isotropic (eigenvalue ratio {ratio:.3f} < 1.5)",
            stage="axis",
        )


class InvalidSceneError(TrunkGaugeError, ValueError):
    pass
