"""Constructors for the built-in example systems."""

import dataclasses

from .dc_motor import DCMotorParams, equilibrium_inputs, make_dc_motor
from .gas import IdealGasParams, make_ideal_gas
from .heat_exchanger import HeatExchangerParams, make_heat_exchanger
from .inductors import InductorParams, make_coupled_inductors
from .microphone import MicrophoneParams, make_microphone
from .spring import make_spring
from .sync_machine import (
    SyncMachineParams,
    blondel_park,
    make_sync_machine,
    make_sync_machine_dq,
    transform_inputs,
    transform_outputs,
    transform_state,
)

# name -> (constructor, parameter dataclass or None)
REGISTRY = {
    "ideal_gas": (make_ideal_gas, IdealGasParams),
    "dc_motor": (make_dc_motor, DCMotorParams),
    "spring": (make_spring, None),
    "coupled_inductors": (make_coupled_inductors, InductorParams),
    "microphone": (make_microphone, MicrophoneParams),
    "sync_machine": (make_sync_machine, SyncMachineParams),
    "sync_machine_dq": (make_sync_machine_dq, SyncMachineParams),
    "heat_exchanger": (make_heat_exchanger, HeatExchangerParams),
}


def make_model(name, params=None):
    """Build a registered model from a plain parameter mapping."""
    try:
        ctor, pcls = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; known models: {sorted(REGISTRY)}") from None
    params = dict(params or {})
    if pcls is None:
        if params:
            raise ValueError(f"model {name!r} takes no parameters")
        return ctor()
    allowed = {f.name for f in dataclasses.fields(pcls)}
    unknown = set(params) - allowed
    if unknown:
        raise ValueError(f"unknown parameters for {name!r}: {sorted(unknown)}")
    return ctor(pcls(**params))


__all__ = [
    "REGISTRY", "make_model",
    "DCMotorParams", "HeatExchangerParams", "IdealGasParams", "InductorParams",
    "MicrophoneParams", "SyncMachineParams",
    "blondel_park", "equilibrium_inputs", "make_coupled_inductors", "make_dc_motor",
    "make_heat_exchanger", "make_ideal_gas", "make_microphone", "make_spring",
    "make_sync_machine", "make_sync_machine_dq",
    "transform_inputs", "transform_outputs", "transform_state",
]
