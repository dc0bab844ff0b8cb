#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SCHÉMAS MARSHMALLOW - OPC UA TRUSTKIT
Fichier: app/models/schemas.py

Validation des fichiers de configuration (serveur, client, scénarios)
et sérialisation du format machine des rapports. Les clés inconnues
sont refusées.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

from marshmallow import RAISE, Schema, fields, post_load, validate, validates_schema, ValidationError

from app.models.assessment import AttackKind, Profile, ScenarioSpec, UserAuth, REDACTED

SECURITY_MODES = ('None', 'Sign', 'SignAndEncrypt')
SECURITY_POLICIES = ('None', 'Basic256Sha256')
TOKEN_TYPES = ('Anonymous', 'UserName')
TRUST_PROFILES = (
    'secure', 'p1-missing-trustlist', 'p2-default-accept-all', 'p2-flag-off',
    'p3-rejected-store-promotion',
)


class StrictSchema(Schema):
    class Meta:
        unknown = RAISE
        ordered = True


class IdentityFileSchema(StrictSchema):
    """Identité persistée: <directory>/<name>.der et <name>.key.der."""
    directory = fields.String(required=True)
    name = fields.String(required=True)
    common_name = fields.String(load_default=None)
    generate = fields.Boolean(load_default=True)


class EndpointFileSchema(StrictSchema):
    security_mode = fields.String(required=True, validate=validate.OneOf(SECURITY_MODES))
    security_policy = fields.String(required=True, validate=validate.OneOf(SECURITY_POLICIES))
    user_tokens = fields.List(fields.String(validate=validate.OneOf(TOKEN_TYPES)),
                              load_default=lambda: ['Anonymous'])

    @validates_schema
    def check_mode_policy(self, data, **kwargs):
        if (data['security_mode'] == 'None') != (data['security_policy'] == 'None'):
            raise ValidationError("Le mode None impose la politique None et inversement")


class NodeFileSchema(StrictSchema):
    node_id = fields.String(required=True)
    value = fields.Raw(required=True)
    writable = fields.Boolean(load_default=False)
    display_name = fields.String(load_default='')


class ServerConfigFileSchema(StrictSchema):
    host = fields.String(load_default='127.0.0.1')
    port = fields.Integer(load_default=4840, validate=validate.Range(min=0, max=65535))
    application_uri = fields.String(load_default=None)
    application_name = fields.String(load_default='TrustKit Server')
    identity = fields.Nested(IdentityFileSchema, load_default=None)
    endpoints = fields.List(fields.Nested(EndpointFileSchema), required=True, validate=validate.Length(min=1))
    trust_profile = fields.String(load_default='secure', validate=validate.OneOf(TRUST_PROFILES))
    trust_store = fields.String(load_default=None)
    users = fields.Dict(keys=fields.String(), values=fields.String(), load_default=dict)
    anonymous_allowed = fields.Boolean(load_default=False)
    nodes = fields.List(fields.Nested(NodeFileSchema), load_default=None)


class ClientConfigFileSchema(StrictSchema):
    application_uri = fields.String(load_default=None)
    application_name = fields.String(load_default='TrustKit Client')
    identity = fields.Nested(IdentityFileSchema, load_default=None)
    trust_profile = fields.String(load_default='secure', validate=validate.OneOf(TRUST_PROFILES))
    trust_store = fields.String(load_default=None)
    endpoint = fields.Nested(EndpointFileSchema, load_default=None)
    username = fields.String(load_default=None)
    password = fields.String(load_default=None)
    encrypt_token_under_none = fields.Boolean(load_default=True)

    @validates_schema
    def check_user(self, data, **kwargs):
        if data.get('password') is not None and not data.get('username'):
            raise ValidationError("Un mot de passe exige un nom d'utilisateur", 'username')


class ScenarioSpecSchema(StrictSchema):
    server_profile = fields.String(required=True, validate=validate.OneOf([p.value for p in Profile]))
    client_profile = fields.String(required=True, validate=validate.OneOf([p.value for p in Profile]))
    user_auth = fields.String(required=True, validate=validate.OneOf([u.value for u in UserAuth]))
    attack = fields.String(required=True, validate=validate.OneOf([a.value for a in AttackKind]))
    seed = fields.Integer(load_default=0)
    server_auto_accept = fields.Boolean(load_default=True)
    client_auto_accept = fields.Boolean(load_default=True)

    @post_load
    def make_spec(self, data, **kwargs):
        return ScenarioSpec(**data)

    def dump_spec(self, spec: ScenarioSpec):
        return self.dump({
            'server_profile': spec.server_profile.value,
            'client_profile': spec.client_profile.value,
            'user_auth': spec.user_auth.value,
            'attack': spec.attack.value,
            'seed': spec.seed,
            'server_auto_accept': spec.server_auto_accept,
            'client_auto_accept': spec.client_auto_accept,
        })


class ScenarioFileSchema(StrictSchema):
    scenarios = fields.List(fields.Nested(ScenarioSpecSchema), required=True, validate=validate.Length(min=1))


# === FORMAT MACHINE DES RAPPORTS ===

def _show_secrets(schema) -> bool:
    return bool(schema.context.get('show_secrets', False))


class CapturedCredentialSchema(StrictSchema):
    username = fields.String()
    password = fields.Method('dump_password')
    token_policy_uri = fields.String(allow_none=True)
    captured_at = fields.DateTime()
    victim_application_uri = fields.String(allow_none=True)

    def dump_password(self, credential):
        return credential.password if _show_secrets(self) else REDACTED


class EvidenceSchema(StrictSchema):
    kind = fields.Function(lambda e: e.kind.value)
    side = fields.Function(lambda e: e.side.value if e.side else None)
    payload = fields.Method('dump_payload')

    def dump_payload(self, evidence):
        payload = dict(evidence.payload)
        if 'password' in payload and not _show_secrets(self):
            payload['password'] = REDACTED
        return payload


class AttackOutcomeSchema(StrictSchema):
    attack = fields.Function(lambda o: o.attack.value)
    result = fields.Function(lambda o: o.result.value)
    evidence = fields.List(fields.Nested(EvidenceSchema))
    transcript = fields.String(allow_none=True)
    notes = fields.List(fields.String())


class AssessmentReportSchema(StrictSchema):
    toolkit_version = fields.String()
    scenario = fields.Method('dump_scenario')
    result = fields.Function(lambda r: r.result.value)
    pitfall_class = fields.Function(lambda r: r.pitfall_class.value if r.pitfall_class else None)
    outcomes = fields.List(fields.Nested(AttackOutcomeSchema))
    captured_credentials = fields.Method('dump_credentials')
    credentials_redacted = fields.Method('dump_redacted')
    transcripts = fields.List(fields.String())
    findings = fields.List(fields.Dict())
    notes = fields.List(fields.String())
    error = fields.String(allow_none=True)

    def dump_scenario(self, report):
        return ScenarioSpecSchema().dump_spec(report.scenario)

    def dump_credentials(self, report):
        schema = CapturedCredentialSchema(many=True)
        schema.context = dict(self.context)
        return schema.dump(report.credentials)

    def dump_redacted(self, report):
        return not _show_secrets(self)
