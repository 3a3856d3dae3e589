"""Exception types raised by the simulator and its tooling."""


class ConfigInvalid(ValueError):
    """Inputs, adversary or protocol parameters violate a precondition."""


class NonBinaryValue(ConfigInvalid):
    """A 1-preference protocol was handed a value outside {0, 1}."""


class ProtocolStuck(RuntimeError):
    """A processor program left the fixed round calendar."""


class SizeLimit(RuntimeError):
    """An enumeration would exceed the caller-supplied cap."""


class UnknownStrategy(ConfigInvalid):
    pass


class EmptySubgroup(ValueError):
    """A subgroup index that the halving tree never reaches."""
