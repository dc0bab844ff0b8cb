# ===== app/config/__init__.py =====
"""
Package de configuration d'OPC UA TrustKit.
Gère les configurations par environnement (dev/prod/test) et les profils
de confiance nommés.
"""

from .base import Config, DevelopmentConfig, ProductionConfig, TestingConfig, get_config, validate_config

__all__ = ['Config', 'DevelopmentConfig', 'ProductionConfig', 'TestingConfig', 'get_config', 'validate_config']
