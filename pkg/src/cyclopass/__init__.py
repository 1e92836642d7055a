"""Verification and falsification of one-port cyclo-passivity for port-Hamiltonian systems."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    LinearData,
    PortHamiltonianSystem,
    StatePartition,
    StructureFlags,
    SupplySample,
    Trajectory,
    check_invariants,
    eval_dynamics,
    eval_outputs,
    supply_rate,
)
from .dissipativity import (  # noqa: E402
    CycleWitness,
    NotFound,
    SearchOptions,
    StorageSearchOptions,
    cyclic_supply,
    estimate_storage_bounds,
    falsify_one_port,
    verify_storage,
)
from .legendre import double_transform, partial_legendre, verify_legendre_identities  # noqa: E402
from .simulate import (  # noqa: E402
    CycleParams,
    FourierSignal,
    IntegratorOptions,
    close_cycle,
    constrained_simulate_x1,
    constrained_simulate_y1,
    integrate,
)
from .structure import StorageCertificate, check_theorem_form  # noqa: E402
