# ===== app/utils/__init__.py =====
"""
Package des utilitaires d'OPC UA TrustKit.
Contient le logging (console, fichiers, performance, audit) et les validateurs.
"""

from .logger import AuditLogger, LoggerMixin, PerformanceLogger, get_logger, setup_logger

__all__ = [
    'AuditLogger',
    'LoggerMixin',
    'PerformanceLogger',
    'get_logger',
    'setup_logger',
]
