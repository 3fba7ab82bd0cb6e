"""Exception hierarchy shared by all beamspot modules."""


class BeamspotError(Exception):
    """Base class for every error raised by the package."""


class DegenerateGeometryError(BeamspotError, ValueError):
    """A location sits on top of (or inside the reference distance of) an array."""


class GridError(BeamspotError, ValueError):
    """A sampling grid is too coarse or too narrow for the requested operation."""


class AliasingError(GridError):
    """A lag shift would wrap around the periodic lag window."""


class DomainError(BeamspotError, ValueError):
    """An operation was called outside the case it is defined for."""


class UnsupportedOrderError(BeamspotError, NotImplementedError):
    """The PA polynomial order is not supported by the requested closed form."""


class ModelConsistencyError(BeamspotError, ValueError):
    """Input statistics violate the Gaussian correlation model."""
