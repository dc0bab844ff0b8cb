#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
OPC UA TRUSTKIT - INITIALISATION
Fichier: app/__init__.py

Factory de la boîte à outils: charge la configuration, crée les dossiers
nécessaires et configure le logging. Les services sont importés à la
demande par le CLI et les tests.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from app.config.base import get_config, validate_config
from app.utils.logger import setup_logger

__version__ = '1.0.0'


@dataclass
class ToolkitContext:
    """Contexte d'exécution partagé par le CLI et le harnais."""
    config: type
    logger: logging.Logger
    version: str = __version__

    @property
    def transcript_dir(self) -> Path:
        return Path(self.config.TRANSCRIPT_DIR)

    @property
    def pki_dir(self) -> Path:
        return Path(self.config.PKI_DIR)


def create_toolkit(config_name: Optional[str] = None, log_level: Optional[str] = None,
                   config_class: Optional[type] = None) -> ToolkitContext:
    """
    Factory pour initialiser la boîte à outils avec la configuration appropriée.

    Args:
        config_name (str): 'development', 'production' ou 'testing' (défaut: TRUSTKIT_ENV)
        log_level (str): Niveau de log forcé
        config_class: Classe de configuration explicite (prioritaire)

    Returns:
        ToolkitContext: Configuration, logger racine et version

    Raises:
        ValueError: Configuration invalide
    """
    config_class = config_class or get_config(config_name)
    validate_config(config_class)

    logger = setup_logger(config_class, level=log_level)
    logger.info(f"🚀 Initialisation d'OPC UA TrustKit {__version__} ({config_class.__name__})")
    logger.debug(f"🌐 Réseau: {config_class.get_network_config()}")
    logger.debug(f"📦 Protocole: {config_class.get_protocol_config()}")
    logger.debug(f"🔐 Cryptographie: {config_class.get_crypto_config()}")

    create_required_directories(config_class, logger)
    return ToolkitContext(config=config_class, logger=logger)


def create_required_directories(config_class, logger: Optional[logging.Logger] = None):
    """
    Crée les dossiers PKI, transcriptions, rapports et logs.

    Args:
        config_class: Classe de configuration
        logger: Logger à utiliser (optionnel)
    """
    config_class.create_directories()
    if logger:
        for directory in (config_class.PKI_DIR, config_class.TRANSCRIPT_DIR, config_class.REPORT_DIR):
            logger.debug(f"📁 Dossier créé/vérifié: {directory}")
        logger.info("✅ Tous les dossiers requis sont prêts")


__all__ = ['create_toolkit', 'ToolkitContext', '__version__']
