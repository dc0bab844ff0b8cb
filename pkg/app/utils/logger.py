#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
CONFIGURATION DU LOGGING - OPC UA TRUSTKIT
Fichier: app/utils/logger.py

Configuration centralisée du système de logging avec rotation, niveaux
configurables, console colorée et journaux dédiés (erreurs, performances,
audit des événements de sécurité).

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import functools
import logging
import logging.handlers
import os
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

import colorlog

from app.exceptions import TrustKitError

ROOT_LOGGER_NAME = 'opcua_trustkit'

LEVEL_EMOJIS = {
    'DEBUG': '🔧',
    'INFO': 'ℹ️',
    'WARNING': '⚠️',
    'ERROR': '❌',
    'CRITICAL': '🚨'
}


class _EmojiMixin:
    """Ajoute un emoji selon le niveau et horodate en UTC."""

    use_emoji = True

    def formatTime(self, record, datefmt=None):
        ct = datetime.fromtimestamp(record.created, tz=timezone.utc)
        return ct.strftime(datefmt or '%Y-%m-%d %H:%M:%S %Z')

    def format(self, record):
        original_msg = super().format(record)
        emoji = LEVEL_EMOJIS.get(record.levelname, '')
        if emoji and self.use_emoji:
            return f"{emoji} {original_msg}"
        return original_msg


class TrustKitFormatter(_EmojiMixin, logging.Formatter):
    pass


class ColoredTrustKitFormatter(_EmojiMixin, colorlog.ColoredFormatter):
    pass


def _config_value(config, key, default):
    if config is None:
        return default
    return getattr(config, key, default)


def setup_logger(config=None, level: str = None):
    """
    Configure le système de logging de la boîte à outils.

    Args:
        config: Classe de configuration (optionnel)
        level: Niveau forcé (prioritaire sur la configuration)
    """
    log_level = level or _config_value(config, 'LOG_LEVEL', os.environ.get('LOG_LEVEL', 'INFO'))
    log_dir = Path(_config_value(config, 'LOG_DIR', 'logs'))
    log_format = _config_value(config, 'LOG_FORMAT', '%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    date_format = _config_value(config, 'LOG_DATE_FORMAT', '%Y-%m-%d %H:%M:%S')
    max_bytes = _config_value(config, 'LOG_MAX_BYTES', 10 * 1024 * 1024)
    backup_count = _config_value(config, 'LOG_BACKUP_COUNT', 5)
    use_emoji = _config_value(config, 'LOG_EMOJI', True)
    log_to_file = _config_value(config, 'LOG_TO_FILE', True)

    numeric_level = getattr(logging, str(log_level).upper(), logging.INFO)

    root_logger = logging.getLogger(ROOT_LOGGER_NAME)
    root_logger.setLevel(numeric_level)
    root_logger.propagate = False

    # Supprimer les handlers existants pour éviter la duplication
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        handler.close()

    formatter = TrustKitFormatter(log_format, date_format)
    formatter.use_emoji = use_emoji

    # Console (stderr) pour ne pas polluer la sortie des rapports
    console_formatter = ColoredTrustKitFormatter(
        '%(log_color)s' + log_format,
        date_format,
        log_colors={
            'DEBUG': 'cyan',
            'INFO': 'green',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'red,bg_white',
        }
    )
    console_formatter.use_emoji = use_emoji
    console_handler = logging.StreamHandler()
    console_handler.setLevel(numeric_level)
    console_handler.setFormatter(console_formatter)
    root_logger.addHandler(console_handler)

    if not log_to_file:
        return root_logger

    log_dir.mkdir(parents=True, exist_ok=True)

    def rotating(filename, handler_level, handler_formatter):
        handler = logging.handlers.RotatingFileHandler(
            log_dir / filename,
            maxBytes=max_bytes,
            backupCount=backup_count,
            encoding='utf-8'
        )
        handler.setLevel(handler_level)
        handler.setFormatter(handler_formatter)
        return handler

    root_logger.addHandler(rotating('trustkit.log', numeric_level, formatter))
    root_logger.addHandler(rotating('errors.log', logging.ERROR, formatter))

    perf_formatter = logging.Formatter('%(asctime)s - %(name)s - %(message)s', date_format)
    logging.getLogger(f'{ROOT_LOGGER_NAME}.performance').addHandler(
        rotating('performance.log', logging.INFO, perf_formatter))
    logging.getLogger(f'{ROOT_LOGGER_NAME}.audit').addHandler(
        rotating('audit.log', logging.INFO, formatter))

    root_logger.info(f"📝 Système de logging configuré - Niveau: {log_level}")
    root_logger.debug(f"📁 Logs sauvegardés dans: {log_dir}")
    return root_logger


class LoggerMixin:
    """
    Mixin pour ajouter facilement le logging à une classe.
    """

    @property
    def logger(self):
        """Retourne un logger configuré pour cette classe."""
        return logging.getLogger(f"{ROOT_LOGGER_NAME}.{self.__class__.__module__}.{self.__class__.__name__}")


class PerformanceLogger:
    """
    Chronomètre une opération longue (scan, matrice) et journalise ses
    métriques à la sortie du bloc.
    """

    def __init__(self, operation_name: str):
        self.operation_name = operation_name
        self.logger = logging.getLogger(f'{ROOT_LOGGER_NAME}.performance')
        self.metrics: Dict[str, Any] = {}
        self.duration: Optional[float] = None
        self._started: Optional[float] = None

    def __enter__(self):
        self._started = time.monotonic()
        self.logger.info(f"⏱️ {self.operation_name}: démarrage")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self._started is None:
            return
        self.duration = time.monotonic() - self._started
        details = ''.join(f", {name}={value}" for name, value in self.metrics.items())
        if exc_type:
            self.logger.error(f"❌ {self.operation_name}: échec après {self.duration:.3f}s ({exc_val}){details}")
        else:
            self.logger.info(f"✅ {self.operation_name}: {self.duration:.3f}s{details}")

    def log_metric(self, metric_name: str, value):
        """Enregistre une métrique, rappelée dans la ligne de fin."""
        self.metrics[metric_name] = value
        self.logger.debug(f"📊 {self.operation_name} - {metric_name}: {value}")


class AuditLogger:
    """
    Logger spécialisé pour les événements de sécurité: décisions de
    confiance, promotions de certificats, identifiants capturés.
    """

    def __init__(self):
        self.logger = logging.getLogger(f'{ROOT_LOGGER_NAME}.audit')

    def log_trust_rejection(self, application_uri: str, thumbprint: str, policy: str, reason: str):
        """
        Log un certificat refusé.

        Args:
            application_uri: URI d'application du pair
            thumbprint: Empreinte hexadécimale
            policy: Politique appliquée
            reason: Code de statut du refus
        """
        self.logger.warning(
            f"🚫 CERTIFICAT REFUSÉ - {application_uri} - Empreinte: {thumbprint} - "
            f"Politique: {policy} - Raison: {reason}")

    def log_trust_acceptance(self, application_uri: str, thumbprint: str, policy: str, basis: str):
        self.logger.info(
            f"🔓 CERTIFICAT ACCEPTÉ - {application_uri} - Empreinte: {thumbprint} - "
            f"Politique: {policy} - Base: {basis}")

    def log_promotion(self, thumbprint: str, application_uri: str):
        self.logger.warning(f"📌 PROMOTION MANUELLE - {application_uri} - Empreinte: {thumbprint}")

    def log_credential_capture(self, username: str, victim_uri: str = None):
        """
        Log la capture d'un identifiant (mot de passe toujours masqué).

        Args:
            username: Nom d'utilisateur capturé
            victim_uri: URI du client victime si observé
        """
        message = f"🎯 IDENTIFIANT CAPTURÉ - Utilisateur: {username} - Mot de passe: ***"
        if victim_uri:
            message += f" - Client: {victim_uri}"
        self.logger.warning(message)

    def log_untrusted_channel(self, side: str, application_uri: str, thumbprint: str):
        self.logger.warning(
            f"🔐 CANAL NON AUTORISÉ ACCEPTÉ - Côté: {side} - {application_uri} - Empreinte: {thumbprint}")


def get_logger(name: str = None):
    """
    Fonction utilitaire pour obtenir un logger configuré.

    Args:
        name: Nom du logger (optionnel)

    Returns:
        Logger configuré
    """
    if name:
        return logging.getLogger(f"{ROOT_LOGGER_NAME}.{name}")
    return logging.getLogger(ROOT_LOGGER_NAME)


def log_function_call(func):
    """
    Trace une étape du harnais et sa durée. Les TrustKitError sont
    journalisées en WARNING, les autres exceptions en ERROR.
    """

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        logger = logging.getLogger(f"{ROOT_LOGGER_NAME}.{func.__module__}")
        subject = getattr(args[0], 'label', None) if args else None
        name = f"{func.__name__}({subject})" if subject else func.__name__
        logger.debug(f"▶️ {name}")
        started = time.monotonic()
        try:
            result = func(*args, **kwargs)
        except Exception as e:
            level = logging.WARNING if isinstance(e, TrustKitError) else logging.ERROR
            logger.log(level, f"❌ {name}: {type(e).__name__}: {e}")
            raise
        logger.debug(f"⏹️ {name} terminé en {time.monotonic() - started:.3f}s")
        return result

    return wrapper


__all__ = [
    'setup_logger', 'LoggerMixin', 'PerformanceLogger', 'AuditLogger',
    'get_logger', 'log_function_call', 'ROOT_LOGGER_NAME'
]
