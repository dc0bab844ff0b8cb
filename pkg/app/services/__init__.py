# ===== app/services/__init__.py =====
"""
Package des services d'OPC UA TrustKit.
Contient la PKI, le canal sécurisé, le serveur et le client OPC UA, les
trois attaques et le scanner. Le harnais (scenario_service) et les rendus
(report_service) s'importent directement.
"""

from .client_service import UAClient
from .middleperson import Middleperson
from .pki_service import TrustStore
from .rogue_client import RogueClient
from .rogue_server import RogueServer
from .scanner_service import OpcScanner
from .server_service import UAServer
from .transcript import Transcript

__all__ = [
    'UAClient',
    'Middleperson',
    'TrustStore',
    'RogueClient',
    'RogueServer',
    'OpcScanner',
    'UAServer',
    'Transcript',
]
