#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE TRANSCRIPTION - OPC UA TRUSTKIT
Fichier: app/services/transcript.py

Enregistrement brut des chunks échangés sur une connexion, pour rejouer
les preuves hors ligne. Format fichier: en-tête b'TKTR' + version, puis
une suite d'enregistrements (direction u8, horodatage f64, longueur u32,
octets du chunk), little-endian.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import struct
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Union

from app.exceptions import Malformed, Truncated
from app.protocol.binary import BinaryReader
from app.protocol.chunks import MESSAGE_HEADER_SIZE, SecurityHeaderAsymmetric
from app.models.channel import POLICY_NONE_URI
from app.utils.logger import LoggerMixin

MAGIC = b'TKTR'
FORMAT_VERSION = 1
RECORD_HEADER = struct.Struct('<BdI')

INBOUND = 0
OUTBOUND = 1
DIRECTION_NAMES = {INBOUND: 'in', OUTBOUND: 'out'}


@dataclass(frozen=True)
class TranscriptRecord:
    direction: int
    timestamp: float
    data: bytes

    @property
    def message_type(self) -> str:
        return self.data[:3].decode('ascii', errors='replace')

    @property
    def chunk_flag(self) -> str:
        return self.data[3:4].decode('ascii', errors='replace')

    @property
    def outbound(self) -> bool:
        return self.direction == OUTBOUND

    def encode(self) -> bytes:
        return RECORD_HEADER.pack(self.direction, self.timestamp, len(self.data)) + self.data

    def asymmetric_header(self) -> Optional[SecurityHeaderAsymmetric]:
        """En-tête de sécurité d'un OPN (transmis en clair), sinon None."""
        if self.message_type != 'OPN':
            return None
        try:
            return SecurityHeaderAsymmetric.read(BinaryReader(self.data, MESSAGE_HEADER_SIZE))
        except (Truncated, Malformed):
            return None


class Transcript(LoggerMixin):
    """
    Journal des chunks d'une connexion. Sans chemin, il reste en mémoire;
    avec un chemin, chaque enregistrement est ajouté au fichier.
    """

    def __init__(self, path: Optional[Union[str, Path]] = None, label: str = ''):
        self.path = Path(path) if path else None
        self.label = label
        self._records: List[TranscriptRecord] = []
        self._lock = threading.Lock()
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_bytes(MAGIC + bytes([FORMAT_VERSION]))

    @property
    def records(self) -> List[TranscriptRecord]:
        with self._lock:
            return list(self._records)

    @property
    def locator(self) -> Optional[str]:
        return str(self.path) if self.path else None

    def record(self, direction: int, data: bytes):
        item = TranscriptRecord(direction, time.time(), bytes(data))
        with self._lock:
            self._records.append(item)
            if self.path:
                with self.path.open('ab') as handle:
                    handle.write(item.encode())

    def outbound(self, data: bytes):
        self.record(OUTBOUND, data)

    def inbound(self, data: bytes):
        self.record(INBOUND, data)

    def __iter__(self) -> Iterator[TranscriptRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    # === REQUÊTES DE PREUVE ===

    def sent_open(self) -> bool:
        """Au moins un OPN a été émis."""
        return any(r.outbound and r.message_type == 'OPN' for r in self.records)

    def completed_open(self, sender_certificate: Optional[bytes] = None) -> bool:
        """
        Un OPN sécurisé émis (avec ce certificat d'émetteur si fourni) a
        reçu une réponse OPN.
        """
        pending = False
        for item in self.records:
            if item.message_type != 'OPN':
                continue
            header = item.asymmetric_header()
            if header is None:
                continue
            if item.outbound:
                secure = header.security_policy_uri != POLICY_NONE_URI
                matches = sender_certificate is None or header.sender_certificate == sender_certificate
                pending = secure and matches
            elif pending:
                return True
        return False

    def contains(self, needle: bytes) -> bool:
        """Recherche d'une séquence d'octets dans tous les chunks."""
        return any(needle in item.data for item in self.records)

    def byte_count(self, direction: Optional[int] = None) -> int:
        return sum(len(r.data) for r in self.records if direction is None or r.direction == direction)

    def summary(self) -> List[dict]:
        """Une ligne par enregistrement: direction, horodatage, type, taille."""
        return [
            {
                'index': index,
                'direction': DIRECTION_NAMES.get(item.direction, '?'),
                'timestamp': item.timestamp,
                'message_type': item.message_type,
                'chunk_flag': item.chunk_flag,
                'size': len(item.data),
            }
            for index, item in enumerate(self.records)
        ]

    # === LECTURE ===

    @classmethod
    def read(cls, path: Union[str, Path]) -> 'Transcript':
        """
        Relit un fichier de transcription.

        Raises:
            Malformed: en-tête inconnu
            Truncated: enregistrement incomplet
        """
        data = Path(path).read_bytes()
        if data[:4] != MAGIC or len(data) < 5:
            raise Malformed(f"{path} n'est pas une transcription TrustKit")
        if data[4] != FORMAT_VERSION:
            raise Malformed(f"Version de transcription non supportée: {data[4]}")

        transcript = cls(label=Path(path).stem)
        offset = 5
        while offset < len(data):
            if offset + RECORD_HEADER.size > len(data):
                raise Truncated(f"En-tête d'enregistrement incomplet à l'octet {offset}")
            direction, timestamp, length = RECORD_HEADER.unpack_from(data, offset)
            offset += RECORD_HEADER.size
            if offset + length > len(data):
                raise Truncated(f"Enregistrement de {length} octets incomplet à l'octet {offset}")
            transcript._records.append(TranscriptRecord(direction, timestamp, data[offset:offset + length]))
            offset += length
        transcript.path = Path(path)
        return transcript
