#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE SCANNER - OPC UA TRUSTKIT
Fichier: app/services/scanner_service.py

Repérage des serveurs OPC UA: HEL/ACK puis FindServers et GetEndpoints
sur un canal None, sans aucune authentification. Les cibles sont des
hôtes, hôte:port, URL opc.tcp ou blocs CIDR IPv4, sondées en parallèle.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import ipaddress
import socket
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Tuple

from app.exceptions import (
    ConfigurationError, ConnectFailed, ProtocolError, ServerRejected, TrustKitError
)
from app.models.endpoint import DEFAULT_PORT, TargetDescriptor, endpoint_url, parse_endpoint_url
from app.models.settings import ClientConfig
from app.protocol.status import StatusCode
from app.services.client_service import UAClient
from app.utils.logger import LoggerMixin, PerformanceLogger

REFUSED = 'refused'
TIMEOUT = 'timeout'
NON_OPC = 'non-opc'
REJECTED = 'rejected'
UNREACHABLE = 'unreachable'


@dataclass
class ScanFailure:
    target: str
    reason: str
    detail: str = ''

    def to_dict(self) -> Dict[str, str]:
        return {'target': self.target, 'reason': self.reason, 'detail': self.detail}


@dataclass
class ScanReport:
    """Serveurs découverts et échecs par cible, dans l'ordre des cibles."""
    descriptors: List[TargetDescriptor] = field(default_factory=list)
    failures: List[ScanFailure] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'descriptors': [d.to_dict() for d in self.descriptors],
            'failures': [f.to_dict() for f in self.failures],
        }


def expand_targets(targets: Iterable[str], default_port: int = DEFAULT_PORT) -> List[Tuple[str, int]]:
    """
    Normalise les cibles en couples (hôte, port), sans doublon.

    Raises:
        ConfigurationError: cible illisible
    """
    expanded: List[Tuple[str, int]] = []
    for raw in targets:
        target = raw.strip()
        if not target:
            continue
        if target.startswith('opc.tcp://'):
            pairs = [parse_endpoint_url(target, default_port)]
        elif '/' in target:
            try:
                network = ipaddress.ip_network(target, strict=False)
            except ValueError as e:
                raise ConfigurationError(f"Bloc CIDR invalide: {target}") from e
            hosts = list(network.hosts()) or [network.network_address]
            pairs = [(str(host), default_port) for host in hosts]
        elif target.count(':') == 1:
            host, port = target.rsplit(':', 1)
            if not port.isdigit() or not 0 < int(port) <= 65535:
                raise ConfigurationError(f"Port invalide dans {target}")
            pairs = [(host, int(port))]
        else:
            pairs = [(target, default_port)]
        for pair in pairs:
            if pair not in expanded:
                expanded.append(pair)
    return expanded


def classify_failure(error: Exception) -> str:
    """Motif d'échec d'une sonde: refused, timeout, non-opc, rejected ou unreachable."""
    if isinstance(error, ConnectFailed):
        cause = error.__cause__
        if isinstance(cause, ConnectionRefusedError):
            return REFUSED
        if isinstance(cause, (socket.timeout, TimeoutError)):
            return TIMEOUT
        return UNREACHABLE
    if isinstance(error, ServerRejected):
        return REJECTED
    if isinstance(error, ProtocolError) and error.status == StatusCode.BadTimeout:
        return TIMEOUT
    return NON_OPC


class OpcScanner(LoggerMixin):
    """Sondeur parallèle de serveurs OPC UA."""

    def __init__(self, config_class=None, timeout: float = None, max_workers: int = None):
        self.config = config_class
        self.timeout = timeout or getattr(config_class, 'SCAN_TIMEOUT', 3.0)
        self.max_workers = max_workers or getattr(config_class, 'SCAN_MAX_WORKERS', 16)

    def probe(self, host: str, port: int) -> TargetDescriptor:
        """
        Raises:
            ConnectFailed, ProtocolError, CodecError
        """
        client = UAClient(ClientConfig(application_name='TrustKit Scanner', timeout=self.timeout))
        return client.survey(endpoint_url(host, port))

    def _probe_safely(self, host: str, port: int):
        try:
            return self.probe(host, port)
        except TrustKitError as e:
            return ScanFailure(f"{host}:{port}", classify_failure(e), str(e))
        except OSError as e:
            return ScanFailure(f"{host}:{port}", UNREACHABLE, str(e))

    def scan(self, targets: Iterable[str], default_port: int = DEFAULT_PORT) -> ScanReport:
        """
        Sonde toutes les cibles; les échecs sont consignés, jamais levés.

        Raises:
            ConfigurationError: cible illisible (avant toute sonde)
        """
        pairs = expand_targets(targets, default_port)
        report = ScanReport()
        if not pairs:
            return report

        self.logger.info(f"🎯 Scan de {len(pairs)} cible(s) ({self.max_workers} threads)")
        with PerformanceLogger(f"scan de {len(pairs)} cible(s)") as perf:
            with ThreadPoolExecutor(max_workers=min(self.max_workers, len(pairs))) as executor:
                results = list(executor.map(lambda pair: self._probe_safely(*pair), pairs))
            perf.log_metric("serveurs", sum(not isinstance(r, ScanFailure) for r in results))

        for result in results:
            if isinstance(result, ScanFailure):
                report.failures.append(result)
                self.logger.debug(f"📡 {result.target}: {result.reason}")
            else:
                report.descriptors.append(result)
                self.logger.info(f"✅ Serveur OPC UA {result.url} "
                                 f"({result.application.application_uri}, {len(result.endpoints)} endpoints)")
        return report


def scan(targets: Iterable[str], default_port: int = DEFAULT_PORT, timeout: float = None,
         max_workers: int = None, config_class=None) -> ScanReport:
    return OpcScanner(config_class, timeout=timeout, max_workers=max_workers).scan(targets, default_port)
