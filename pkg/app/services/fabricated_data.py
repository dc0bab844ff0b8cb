#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
GÉNÉRATEUR DE DONNÉES FABRIQUÉES - OPC UA TRUSTKIT
Fichier: app/services/fabricated_data.py

Valeurs servies par le Rogue Server à la place des vraies valeurs de
procédé. Modes: constant, last_seen (dernière valeur réelle relayée,
sinon la constante), random_walk (marche aléatoire numpy à graine fixe)
ou une fonction fournie par l'appelant.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import threading
from enum import Enum
from typing import Any, Callable, Dict, Optional, Union

import numpy as np

from app.exceptions import ConfigurationError
from app.protocol.types import NodeId
from app.utils.logger import LoggerMixin

ValueHook = Callable[[NodeId, Any], Any]


class FabricatedMode(str, Enum):
    CONSTANT = 'constant'
    LAST_SEEN = 'last_seen'
    RANDOM_WALK = 'random_walk'
    HOOK = 'hook'


def _is_numeric(value: Any) -> bool:
    return isinstance(value, (int, float, np.number)) and not isinstance(value, bool)


def _shaped(value: float, template: Any) -> Any:
    """Ramène une valeur numérique au type du modèle (entier ou flottant)."""
    if isinstance(template, int) and not isinstance(template, bool):
        return int(round(value))
    return float(value)


class FabricatedDataGenerator(LoggerMixin):
    """
    Fabrique une valeur par nœud. Les modèles non numériques (chaînes,
    booléens) sont renvoyés tels quels, ou leur dernière valeur observée.
    """

    def __init__(self, mode: Union[str, FabricatedMode] = FabricatedMode.LAST_SEEN, constant: float = 0.0,
                 seed: Optional[int] = None, hook: Optional[ValueHook] = None, step: float = 1.0):
        try:
            self.mode = FabricatedMode(mode) if hook is None else FabricatedMode.HOOK
        except ValueError as e:
            raise ConfigurationError(f"Mode de données fabriquées inconnu: {mode}") from e
        if self.mode == FabricatedMode.HOOK and hook is None:
            raise ConfigurationError("Le mode hook exige une fonction")
        self.constant = constant
        self.step = step
        self.hook = hook
        self._rng = np.random.default_rng(seed)
        self._last_seen: Dict[str, Any] = {}
        self._walk: Dict[str, float] = {}
        self._lock = threading.Lock()

    @staticmethod
    def _key(node_id: Union[str, NodeId]) -> str:
        return node_id.to_string() if isinstance(node_id, NodeId) else str(node_id)

    def observe(self, node_id: Union[str, NodeId], value: Any):
        """Mémorise une valeur réelle vue en transit."""
        with self._lock:
            self._last_seen[self._key(node_id)] = value

    def last_seen(self, node_id: Union[str, NodeId]) -> Any:
        with self._lock:
            return self._last_seen.get(self._key(node_id))

    def value_for(self, node_id: Union[str, NodeId], template: Any = None) -> Any:
        """
        Valeur fabriquée pour un nœud.

        Args:
            node_id: Nœud lu par la victime
            template: Valeur dont on reprend le type (valeur du clone)
        """
        key = self._key(node_id)
        if self.mode == FabricatedMode.HOOK:
            return self.hook(node_id if isinstance(node_id, NodeId) else NodeId.parse(key), template)

        with self._lock:
            seen = self._last_seen.get(key)
            if not _is_numeric(template if template is not None else self.constant):
                return seen if seen is not None else template

            if self.mode == FabricatedMode.CONSTANT:
                return _shaped(self.constant, template)
            if self.mode == FabricatedMode.LAST_SEEN:
                return seen if seen is not None else _shaped(self.constant, template)

            start = self._walk.get(key)
            if start is None:
                start = float(seen) if _is_numeric(seen) else float(self.constant)
            current = start + float(self._rng.normal(0.0, self.step))
            self._walk[key] = current
            return _shaped(current, template)
