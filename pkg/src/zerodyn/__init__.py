"""Closed-form normal coordinates and zero dynamics for block-structured systems."""

from .model import Dimensions, StateVector, SystemModel, drift, dynamics, get_model, input_columns

__all__ = ["Dimensions", "StateVector", "SystemModel", "drift", "dynamics", "get_model", "input_columns"]
__version__ = "0.1.0"
