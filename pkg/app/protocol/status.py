"""
Codes de statut OPC UA utilisés par la boîte à outils.

Les valeurs sont celles de la partie 6 de la norme; seuls les codes
réellement émis ou interprétés ici sont déclarés.
"""

from enum import IntEnum


class StatusCode(IntEnum):
    Good = 0x00000000
    BadUnexpectedError = 0x80010000
    BadInternalError = 0x80020000
    BadDecodingError = 0x80070000
    BadEncodingLimitsExceeded = 0x80080000
    BadTimeout = 0x800A0000
    BadServiceUnsupported = 0x800B0000
    BadCertificateInvalid = 0x80120000
    BadSecurityChecksFailed = 0x80130000
    BadCertificateTimeInvalid = 0x80140000
    BadCertificateUriInvalid = 0x80170000
    BadCertificateUntrusted = 0x801A0000
    BadUserAccessDenied = 0x801F0000
    BadIdentityTokenInvalid = 0x80200000
    BadIdentityTokenRejected = 0x80210000
    BadSecureChannelIdInvalid = 0x80220000
    BadNonceInvalid = 0x80240000
    BadSessionIdInvalid = 0x80250000
    BadSessionClosed = 0x80260000
    BadSessionNotActivated = 0x80270000
    BadRequestHeaderInvalid = 0x802A0000
    BadNodeIdUnknown = 0x80340000
    BadAttributeIdInvalid = 0x80350000
    BadNotWritable = 0x803B0000
    BadSecurityModeRejected = 0x80540000
    BadSecurityPolicyRejected = 0x80550000
    BadApplicationSignatureInvalid = 0x80580000
    BadTypeMismatch = 0x80740000
    BadTcpMessageTypeInvalid = 0x807E0000
    BadTcpSecureChannelUnknown = 0x807F0000
    BadTcpMessageTooLarge = 0x80800000
    BadTcpInternalError = 0x80820000
    BadSecureChannelClosed = 0x80860000
    BadSecureChannelTokenUnknown = 0x80870000
    BadSequenceNumberInvalid = 0x80880000


def is_good(code: int) -> bool:
    """Vrai si les deux bits de sévérité sont à zéro."""
    return (code & 0xC0000000) == 0


def status_name(code: int) -> str:
    try:
        return StatusCode(code).name
    except ValueError:
        return f"0x{code:08X}"
