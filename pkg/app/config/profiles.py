#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
PROFILS DE CONFIANCE ET FICHIERS DE CONFIGURATION - OPC UA TRUSTKIT
Fichier: app/config/profiles.py

Profils de confiance nommés et chargement des fichiers JSON décrivant un
serveur, un client ou une liste de scénarios. Chaque fichier est validé
par un schéma marshmallow; les clés inconnues sont refusées.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from marshmallow import ValidationError

from app.exceptions import ConfigurationError, PkiError
from app.models.assessment import Profile, ScenarioSpec
from app.models.channel import BASIC256SHA256_URI, POLICY_NONE_URI
from app.models.endpoint import endpoint_offer
from app.models.node_store import NodeEntry
from app.models.schemas import ClientConfigFileSchema, ScenarioFileSchema, ServerConfigFileSchema
from app.models.settings import ClientConfig, ServerConfig
from app.models.trust import TrustPolicy
from app.protocol.structures import EndpointDescription, MessageSecurityMode, UserTokenType
from app.utils.logger import get_logger

logger = get_logger(__name__)

TRUST_PROFILES: Dict[str, TrustPolicy] = {
    'secure': TrustPolicy.strict(),
    'p1-missing-trustlist': TrustPolicy.accept_all(),
    'p2-default-accept-all': TrustPolicy.accept_all_default_flag(True),
    'p2-flag-off': TrustPolicy.accept_all_default_flag(False),
    'p3-rejected-store-promotion': TrustPolicy.rejected_store(),
}

SECURITY_MODES = {
    'None': MessageSecurityMode.NONE,
    'Sign': MessageSecurityMode.SIGN,
    'SignAndEncrypt': MessageSecurityMode.SIGN_AND_ENCRYPT,
}
SECURITY_POLICIES = {'None': POLICY_NONE_URI, 'Basic256Sha256': BASIC256SHA256_URI}
TOKEN_TYPES = {'Anonymous': UserTokenType.ANONYMOUS, 'UserName': UserTokenType.USERNAME}


def trust_policy_for_name(name: str) -> TrustPolicy:
    """
    Raises:
        ConfigurationError: profil inconnu
    """
    try:
        return TRUST_PROFILES[name]
    except KeyError:
        raise ConfigurationError(
            f"Profil de confiance inconnu: {name} (disponibles: {', '.join(TRUST_PROFILES)})") from None


def policy_for_profile(profile: Profile, auto_accept: bool = True) -> TrustPolicy:
    """Politique de confiance d'un profil de victime."""
    profile = Profile(profile)
    if profile == Profile.P1_MISSING_TRUSTLIST:
        return TrustPolicy.accept_all()
    if profile == Profile.P2_DEFAULT_ACCEPT_ALL:
        return TrustPolicy.accept_all_default_flag(auto_accept)
    if profile == Profile.P3_REJECTED_STORE_PROMOTION:
        return TrustPolicy.rejected_store()
    return TrustPolicy.strict()


def profile_name_for(profile: Profile, auto_accept: bool = True) -> str:
    profile = Profile(profile)
    if profile == Profile.P2_DEFAULT_ACCEPT_ALL and not auto_accept:
        return 'p2-flag-off'
    return {
        Profile.SECURE: 'secure',
        Profile.P1_MISSING_TRUSTLIST: 'p1-missing-trustlist',
        Profile.P2_DEFAULT_ACCEPT_ALL: 'p2-default-accept-all',
        Profile.P3_REJECTED_STORE_PROMOTION: 'p3-rejected-store-promotion',
    }[profile]


def endpoint_from_file(data: Dict[str, Any]) -> EndpointDescription:
    return endpoint_offer(
        SECURITY_MODES[data['security_mode']],
        SECURITY_POLICIES[data['security_policy']],
        [TOKEN_TYPES[name] for name in data['user_tokens']],
    )


def load_json(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Raises:
        ConfigurationError: fichier absent ou JSON invalide
    """
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding='utf-8'))
    except FileNotFoundError:
        raise ConfigurationError(f"Fichier de configuration introuvable: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"JSON invalide dans {path}: {e}") from e


def _validated(schema, data: Dict[str, Any], source: str):
    try:
        return schema.load(data)
    except ValidationError as e:
        raise ConfigurationError(f"Configuration invalide ({source}): {e.messages}") from e


def _identity_from(section: Optional[Dict[str, Any]], application_uri: str, default_cn: str, config_class):
    from app.services.pki_service import load_identity, load_or_create_identity

    if section is None:
        return None
    try:
        if section['generate']:
            return load_or_create_identity(
                section['directory'], section['name'],
                section['common_name'] or default_cn, application_uri,
                validity_days=getattr(config_class, 'CERTIFICATE_VALIDITY_DAYS', 365),
                key_bits=getattr(config_class, 'KEY_BITS', 2048),
            )
        return load_identity(section['directory'], section['name'])
    except PkiError as e:
        raise ConfigurationError(f"Identité inutilisable: {e}") from e


def _trust_store_from(path: Optional[str]):
    from app.services.pki_service import TrustStore

    return TrustStore(path) if path else TrustStore()


def load_server_config(path: Union[str, Path], config_class=None) -> ServerConfig:
    """
    Construit un ServerConfig depuis un fichier JSON.

    Args:
        path: Fichier de configuration serveur
        config_class: Classe de configuration (valeurs par défaut)

    Raises:
        ConfigurationError: fichier, schéma ou identité invalide
    """
    data = _validated(ServerConfigFileSchema(), load_json(path), str(path))
    application_uri = data['application_uri'] or 'urn:opcua-trustkit:server'
    identity = _identity_from(data['identity'], application_uri, data['application_name'], config_class)

    kwargs = {}
    if data['nodes'] is not None:
        kwargs['nodes'] = {
            node['node_id']: NodeEntry.of(node['value'], node['writable'], node['display_name'])
            for node in data['nodes']
        }
    server_config = ServerConfig(
        identity=identity,
        endpoints=[endpoint_from_file(e) for e in data['endpoints']],
        trust_policy=trust_policy_for_name(data['trust_profile']),
        trust_store=_trust_store_from(data['trust_store']),
        users=dict(data['users']),
        anonymous_allowed=data['anonymous_allowed'],
        host=data['host'],
        port=data['port'],
        application_uri=data['application_uri'] or (identity.application_uri if identity else application_uri),
        application_name=data['application_name'],
        bcrypt_rounds=getattr(config_class, 'BCRYPT_ROUNDS', 12),
        max_chunk_size=getattr(config_class, 'MAX_CHUNK_SIZE', 65536),
        max_chunk_count=getattr(config_class, 'MAX_CHUNK_COUNT', 64),
        **kwargs,
    )
    logger.info(f"📋 Configuration serveur chargée: {path} ({len(server_config.endpoints)} endpoints, "
                f"profil {data['trust_profile']})")
    return server_config


def load_client_config(path: Union[str, Path], config_class=None) -> ClientConfig:
    """
    Construit un ClientConfig depuis un fichier JSON.

    Raises:
        ConfigurationError: fichier, schéma ou identité invalide
    """
    data = _validated(ClientConfigFileSchema(), load_json(path), str(path))
    application_uri = data['application_uri'] or 'urn:opcua-trustkit:client'
    identity = _identity_from(data['identity'], application_uri, data['application_name'], config_class)

    client_config = ClientConfig(
        identity=identity,
        trust_policy=trust_policy_for_name(data['trust_profile']),
        trust_store=_trust_store_from(data['trust_store']),
        endpoint_selection=endpoint_from_file(data['endpoint']) if data['endpoint'] else None,
        username=data['username'],
        password=data['password'],
        encrypt_token_under_none=data['encrypt_token_under_none'],
        application_name=data['application_name'],
        application_uri=application_uri,
        timeout=getattr(config_class, 'SOCKET_TIMEOUT', 10.0),
    )
    logger.info(f"📋 Configuration client chargée: {path} (profil {data['trust_profile']})")
    return client_config


def load_scenario_file(path: Union[str, Path]) -> List[ScenarioSpec]:
    """
    Raises:
        ConfigurationError: fichier ou schéma invalide
    """
    data = _validated(ScenarioFileSchema(), load_json(path), str(path))
    return list(data['scenarios'])
