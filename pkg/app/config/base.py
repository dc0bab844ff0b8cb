#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
CONFIGURATION - OPC UA TRUSTKIT
Fichier: app/config/base.py

Paramètres de la boîte à outils, lus depuis l'environnement avec des
valeurs par défaut: réseau, découpage en chunks, délais, cryptographie,
répertoires, journalisation et constantes du harnais d'évaluation.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import logging
import os
import tempfile
from pathlib import Path

# Répertoire racine du projet
BASE_DIR = Path(__file__).parent.parent.parent.absolute()

logger = logging.getLogger(__name__)


def _env_bool(name: str, default: str) -> bool:
    return os.environ.get(name, default).lower() == 'true'


class Config:
    """Configuration de base."""

    DEBUG = False
    TESTING = False
    TOOLKIT_VERSION = '1.0.0'

    # === CONFIGURATION RÉSEAU ===

    LISTEN_HOST = os.environ.get('TRUSTKIT_LISTEN_HOST', '127.0.0.1')
    DEFAULT_PORT = int(os.environ.get('TRUSTKIT_DEFAULT_PORT', 4840))

    # Délais (secondes)
    SOCKET_TIMEOUT = float(os.environ.get('TRUSTKIT_SOCKET_TIMEOUT', 10.0))
    SCAN_TIMEOUT = float(os.environ.get('TRUSTKIT_SCAN_TIMEOUT', 3.0))
    SCAN_MAX_WORKERS = int(os.environ.get('TRUSTKIT_SCAN_MAX_WORKERS', 16))
    PHASE_TIMEOUT = float(os.environ.get('TRUSTKIT_PHASE_TIMEOUT', 30.0))

    # === CONFIGURATION PROTOCOLE ===

    MAX_CHUNK_SIZE = int(os.environ.get('TRUSTKIT_MAX_CHUNK_SIZE', 65536))
    MIN_CHUNK_SIZE = 8192
    MAX_CHUNK_COUNT = int(os.environ.get('TRUSTKIT_MAX_CHUNK_COUNT', 64))
    MAX_ARRAY_LENGTH = int(os.environ.get('TRUSTKIT_MAX_ARRAY_LENGTH', 65536))
    TOKEN_LIFETIME_MS = int(os.environ.get('TRUSTKIT_TOKEN_LIFETIME_MS', 3_600_000))

    # === CONFIGURATION CRYPTOGRAPHIQUE ===

    KEY_BITS = int(os.environ.get('TRUSTKIT_KEY_BITS', 2048))
    CERTIFICATE_VALIDITY_DAYS = int(os.environ.get('TRUSTKIT_CERT_VALIDITY_DAYS', 365))
    BCRYPT_ROUNDS = int(os.environ.get('TRUSTKIT_BCRYPT_ROUNDS', 12))
    ENCRYPT_TOKEN_UNDER_NONE = _env_bool('TRUSTKIT_ENCRYPT_TOKEN_UNDER_NONE', 'true')

    # === CONFIGURATION RÉPERTOIRES ===

    DATA_DIR = Path(os.environ.get('TRUSTKIT_DATA_DIR', BASE_DIR / 'data'))
    PKI_DIR = Path(os.environ.get('TRUSTKIT_PKI_DIR', DATA_DIR / 'pki'))
    TRANSCRIPT_DIR = Path(os.environ.get('TRUSTKIT_TRANSCRIPT_DIR', DATA_DIR / 'transcripts'))
    REPORT_DIR = Path(os.environ.get('TRUSTKIT_REPORT_DIR', DATA_DIR / 'reports'))
    LOG_DIR = Path(os.environ.get('LOG_DIR', BASE_DIR / 'logs'))

    # === CONFIGURATION LOGGING ===

    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')
    LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    LOG_DATE_FORMAT = '%Y-%m-%d %H:%M:%S'
    LOG_MAX_BYTES = 10 * 1024 * 1024  # 10MB
    LOG_BACKUP_COUNT = 5
    LOG_EMOJI = True
    LOG_TO_FILE = True

    # === CONFIGURATION HARNAIS ===

    HARNESS_USERNAME = os.environ.get('TRUSTKIT_HARNESS_USER', 'operator')
    HARNESS_PASSWORD = os.environ.get('TRUSTKIT_HARNESS_PASSWORD', 'secret')
    HARNESS_SERVER_URI = 'urn:trustkit:victim:server'
    HARNESS_CLIENT_URI = 'urn:trustkit:victim:client'
    OPERATOR_PROMOTION_ROUNDS = 3
    MATRIX_WORKERS = int(os.environ.get('TRUSTKIT_MATRIX_WORKERS', 1))

    # Nœuds par défaut: (valeur, modifiable, nom affiché)
    DEFAULT_NODES = {
        'ns=1;s=sensor': (21.5, False, 'Sensor'),
        'ns=1;s=setpoint': (50.0, True, 'Setpoint'),
        'ns=1;s=status': ('RUNNING', False, 'Status'),
    }

    # Données fabriquées par le serveur malveillant
    FABRICATED_MODE = os.environ.get('TRUSTKIT_FABRICATED_MODE', 'last_seen')
    FABRICATED_CONSTANT = float(os.environ.get('TRUSTKIT_FABRICATED_CONSTANT', 0.0))

    # === MÉTHODES UTILITAIRES ===

    @classmethod
    def create_directories(cls):
        """Crée tous les répertoires nécessaires."""
        for directory in (cls.DATA_DIR, cls.PKI_DIR, cls.TRANSCRIPT_DIR, cls.REPORT_DIR, cls.LOG_DIR):
            Path(directory).mkdir(parents=True, exist_ok=True)

    @classmethod
    def get_network_config(cls):
        """Retourne la configuration réseau."""
        return {
            'listen_host': cls.LISTEN_HOST,
            'default_port': cls.DEFAULT_PORT,
            'socket_timeout': cls.SOCKET_TIMEOUT,
            'scan_timeout': cls.SCAN_TIMEOUT,
            'scan_max_workers': cls.SCAN_MAX_WORKERS,
            'phase_timeout': cls.PHASE_TIMEOUT,
        }

    @classmethod
    def get_protocol_config(cls):
        """Retourne les limites du protocole."""
        return {
            'max_chunk_size': cls.MAX_CHUNK_SIZE,
            'max_chunk_count': cls.MAX_CHUNK_COUNT,
            'max_array_length': cls.MAX_ARRAY_LENGTH,
            'token_lifetime_ms': cls.TOKEN_LIFETIME_MS,
        }

    @classmethod
    def get_crypto_config(cls):
        """Retourne les paramètres cryptographiques."""
        return {
            'key_bits': cls.KEY_BITS,
            'certificate_validity_days': cls.CERTIFICATE_VALIDITY_DAYS,
            'bcrypt_rounds': cls.BCRYPT_ROUNDS,
            'encrypt_token_under_none': cls.ENCRYPT_TOKEN_UNDER_NONE,
        }


class DevelopmentConfig(Config):
    """Configuration pour développement."""
    DEBUG = True

    # Logs détaillés
    LOG_LEVEL = 'DEBUG'


class ProductionConfig(Config):
    """Configuration pour usage opérationnel (campagnes d'évaluation)."""
    DEBUG = False

    LOG_LEVEL = 'INFO'
    LOG_EMOJI = False

    # Clés plus longues pour les identités persistées
    KEY_BITS = int(os.environ.get('TRUSTKIT_KEY_BITS', 4096))


class TestingConfig(Config):
    """Configuration pour tests."""
    TESTING = True
    DEBUG = True

    # Répertoires de test
    temp_dir = Path(tempfile.gettempdir()) / 'test_opcua_trustkit'
    DATA_DIR = temp_dir
    PKI_DIR = temp_dir / 'pki'
    TRANSCRIPT_DIR = temp_dir / 'transcripts'
    REPORT_DIR = temp_dir / 'reports'
    LOG_DIR = temp_dir / 'logs'

    # Hachage rapide et délais courts
    BCRYPT_ROUNDS = 4
    SOCKET_TIMEOUT = 5.0
    SCAN_TIMEOUT = 1.0
    PHASE_TIMEOUT = 30.0

    # Logging minimal
    LOG_LEVEL = 'WARNING'
    LOG_TO_FILE = False


# Dictionnaire de mappage des configurations
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}


def get_config(config_name=None):
    """
    Retourne la classe de configuration appropriée.

    Args:
        config_name (str): Nom de la configuration (défaut: TRUSTKIT_ENV)

    Returns:
        Config: Classe de configuration
    """
    if config_name is None:
        config_name = os.environ.get('TRUSTKIT_ENV', 'development')

    config_class = config.get(config_name, DevelopmentConfig)
    logger.debug(f"🔧 Configuration chargée: {config_class.__name__}")
    return config_class


def validate_config(config_class):
    """
    Valide les paramètres de configuration.

    Args:
        config_class: Classe de configuration

    Raises:
        ValueError: Si la configuration est invalide
    """
    if not 0 < config_class.DEFAULT_PORT <= 65535:
        raise ValueError(f"DEFAULT_PORT hors limites: {config_class.DEFAULT_PORT}")

    if config_class.MAX_CHUNK_SIZE < config_class.MIN_CHUNK_SIZE:
        raise ValueError(f"MAX_CHUNK_SIZE doit être >= {config_class.MIN_CHUNK_SIZE}")

    if config_class.MAX_CHUNK_COUNT < 1:
        raise ValueError("MAX_CHUNK_COUNT doit être positif")

    if config_class.KEY_BITS not in (2048, 4096):
        raise ValueError("KEY_BITS doit valoir 2048 ou 4096")

    if config_class.CERTIFICATE_VALIDITY_DAYS <= 0:
        raise ValueError("CERTIFICATE_VALIDITY_DAYS doit être positif")

    for name in ('SOCKET_TIMEOUT', 'SCAN_TIMEOUT', 'PHASE_TIMEOUT'):
        if getattr(config_class, name) <= 0:
            raise ValueError(f"{name} doit être positif")

    if not 4 <= config_class.BCRYPT_ROUNDS <= 31:
        raise ValueError("BCRYPT_ROUNDS doit être compris entre 4 et 31")

    if config_class.FABRICATED_MODE not in ('constant', 'last_seen', 'random_walk'):
        raise ValueError(f"FABRICATED_MODE inconnu: {config_class.FABRICATED_MODE}")

    if not config_class.HARNESS_USERNAME:
        raise ValueError("HARNESS_USERNAME ne peut pas être vide")
