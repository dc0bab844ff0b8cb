#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
VALIDATEURS - OPC UA TRUSTKIT
Fichier: app/utils/validators.py

Validation des paramètres saisis en ligne de commande: cibles de scan,
adresses d'écoute, URL opc.tcp, profils et scénarios.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import ipaddress
import re
from pathlib import Path
from typing import Any, Dict, Optional
from urllib.parse import urlparse

from app.config.profiles import TRUST_PROFILES
from app.models.assessment import AttackKind, Profile, ScenarioSpec, UserAuth
from app.utils.logger import get_logger

logger = get_logger(__name__)

_HOSTNAME_PATTERN = re.compile(r'^(?=.{1,253}$)([A-Za-z0-9]([A-Za-z0-9-]{0,61}[A-Za-z0-9])?)(\.[A-Za-z0-9]([A-Za-z0-9-]{0,61}[A-Za-z0-9])?)*$')

# Au-delà, le scan est considéré comme long
LARGE_SCAN_HOSTS = 1024


def _result() -> Dict[str, Any]:
    return {'valid': True, 'errors': [], 'warnings': []}


def _finish(result: Dict[str, Any]) -> Dict[str, Any]:
    result['valid'] = len(result['errors']) == 0
    return result


def validate_host(host: str) -> Dict[str, Any]:
    """
    Valide un nom d'hôte ou une adresse IP.

    Returns:
        Résultat de validation
    """
    result = _result()
    if not host:
        result['errors'].append("Hôte vide")
        return _finish(result)
    try:
        ipaddress.ip_address(host)
    except ValueError:
        if not _HOSTNAME_PATTERN.match(host):
            result['errors'].append(f"Hôte invalide: {host}")
    return _finish(result)


def validate_port(port: Any, allow_zero: bool = False) -> Dict[str, Any]:
    result = _result()
    try:
        value = int(port)
    except (TypeError, ValueError):
        result['errors'].append(f"Port non numérique: {port}")
        return _finish(result)
    low = 0 if allow_zero else 1
    if not low <= value <= 65535:
        result['errors'].append(f"Port hors limites: {value}")
    elif 0 < value < 1024:
        result['warnings'].append(f"Port privilégié {value}: droits administrateur requis pour écouter")
    return _finish(result)


def validate_listen_address(text: str) -> Dict[str, Any]:
    """
    Valide une adresse d'écoute hôte:port (port 0 = attribué par le système).

    Returns:
        Résultat de validation avec 'host' et 'port' si valide
    """
    result = _result()
    host, _, port = (text or '').rpartition(':')
    if not host or not port:
        result['errors'].append(f"Adresse d'écoute attendue sous la forme hôte:port: {text}")
        return _finish(result)

    host_check = validate_host(host)
    port_check = validate_port(port, allow_zero=True)
    result['errors'].extend(host_check['errors'] + port_check['errors'])
    result['warnings'].extend(port_check['warnings'])
    if host in ('0.0.0.0', '::'):
        result['warnings'].append("Écoute sur toutes les interfaces")
    if not result['errors']:
        result['host'], result['port'] = host, int(port)
    return _finish(result)


def validate_endpoint_url(url: str) -> Dict[str, Any]:
    """Valide une URL opc.tcp://hôte[:port][/chemin]."""
    result = _result()
    parsed = urlparse(url or '')
    if parsed.scheme != 'opc.tcp':
        result['errors'].append(f"Schéma opc.tcp attendu: {url}")
        return _finish(result)
    if not parsed.hostname:
        result['errors'].append(f"Hôte absent de l'URL: {url}")
        return _finish(result)
    result['errors'].extend(validate_host(parsed.hostname)['errors'])
    try:
        port = parsed.port
    except ValueError:
        result['errors'].append(f"Port invalide dans {url}")
        port = None
    if port is None and not result['errors']:
        result['warnings'].append("Port absent, 4840 utilisé")
    return _finish(result)


def validate_scan_target(target: str) -> Dict[str, Any]:
    """
    Valide une cible de scan: hôte, hôte:port, URL opc.tcp ou bloc CIDR IPv4.
    """
    result = _result()
    target = (target or '').strip()
    if not target:
        result['errors'].append("Cible vide")
        return _finish(result)

    if target.startswith('opc.tcp://'):
        return validate_endpoint_url(target)

    if '/' in target:
        try:
            network = ipaddress.IPv4Network(target, strict=False)
        except ValueError as e:
            result['errors'].append(f"Bloc CIDR invalide {target}: {e}")
            return _finish(result)
        if network.num_addresses > LARGE_SCAN_HOSTS:
            result['warnings'].append(f"{network.num_addresses} adresses à sonder - scan long")
        return _finish(result)

    host, sep, port = target.rpartition(':')
    if not sep:
        host, port = target, None
    result['errors'].extend(validate_host(host)['errors'])
    if port is not None:
        port_check = validate_port(port)
        result['errors'].extend(port_check['errors'])
    return _finish(result)


def validate_profile_name(name: str) -> Dict[str, Any]:
    result = _result()
    if name not in TRUST_PROFILES:
        result['errors'].append(f"Profil inconnu: {name} (disponibles: {', '.join(TRUST_PROFILES)})")
    elif name != 'secure':
        result['warnings'].append(f"Profil {name} volontairement vulnérable")
    return _finish(result)


def validate_scenario_spec(spec: ScenarioSpec) -> Dict[str, Any]:
    """
    Vérifie la cohérence d'un scénario; les incohérences bénignes sont des
    avertissements.
    """
    result = _result()
    if spec.forwarding_only:
        result['warnings'].append(
            "Middleperson sans authentification UserName: variante relais seul, sans rejeu")
    if spec.server_profile != Profile.P2_DEFAULT_ACCEPT_ALL and not spec.server_auto_accept:
        result['warnings'].append("server_auto_accept ignoré hors profil P2")
    if spec.client_profile != Profile.P2_DEFAULT_ACCEPT_ALL and not spec.client_auto_accept:
        result['warnings'].append("client_auto_accept ignoré hors profil P2")
    if spec.seed < 0:
        result['errors'].append("La graine doit être positive ou nulle")
    if spec.attack == AttackKind.ROGUE_CLIENT and spec.user_auth == UserAuth.USERNAME:
        result['warnings'].append("Rogue Client: identifiants fournis par l'attaquant s'ils sont connus")
    return _finish(result)


def validate_transcript_path(path: str) -> Dict[str, Any]:
    result = _result()
    candidate: Optional[Path] = Path(path) if path else None
    if candidate is None or not candidate.exists():
        result['errors'].append(f"Transcription introuvable: {path}")
    elif candidate.is_dir():
        result['errors'].append(f"{path} est un dossier")
    elif candidate.stat().st_size == 0:
        result['warnings'].append(f"Transcription vide: {path}")
    return _finish(result)
