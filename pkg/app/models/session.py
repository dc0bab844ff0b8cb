#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
MODÈLE SESSION - OPC UA TRUSTKIT
Fichier: app/models/session.py

État d'une session côté serveur, liée au canal qui l'a créée.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

from app.protocol.types import NodeId

AUTH_TOKEN_LENGTH = 32
SESSION_NONCE_LENGTH = 32


@dataclass
class SessionState:
    """
    Attributes:
        session_id: Identifiant public de la session
        authentication_token: Jeton opaque de 32 octets (NodeId ByteString)
        server_nonce: Nonce serveur courant, renouvelé à chaque activation
        activated: Vrai après un ActivateSession réussi
        user: Nom d'utilisateur authentifié, None pour anonyme
        channel_id: Canal auquel la session est liée
    """
    session_id: NodeId
    authentication_token: NodeId
    server_nonce: bytes
    channel_id: int
    activated: bool = False
    user: Optional[str] = None
    client_application_uri: Optional[str] = None
    client_certificate: Optional[bytes] = None
    session_name: Optional[str] = None
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    @property
    def is_anonymous(self) -> bool:
        return self.activated and self.user is None

    def describe(self) -> str:
        who = self.user or 'anonyme'
        state = 'active' if self.activated else 'créée'
        return f"session {self.session_id} ({state}, {who})"
