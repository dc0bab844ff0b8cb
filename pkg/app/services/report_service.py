#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE RAPPORTS - OPC UA TRUSTKIT
Fichier: app/services/report_service.py

Rendu des rapports d'évaluation: format humain (texte en sections) et
format machine (un document JSON à clés triées, stable octet pour octet
pour un même rapport). Les mots de passe capturés sont masqués sauf
demande explicite. Les matrices sont résumées par un tableau croisé
pandas.

Auteur: Équipe Développement
Date: 2025
Version: 1.0
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd

from app.exceptions import ConfigurationError
from app.models.assessment import REDACTED, AssessmentReport, AttackOutcome, AttackResult, CapturedCredential
from app.models.schemas import AssessmentReportSchema, AttackOutcomeSchema, CapturedCredentialSchema
from app.services.scanner_service import ScanReport
from app.services.transcript import Transcript
from app.utils.logger import get_logger

logger = get_logger(__name__)

HUMAN = 'human'
MACHINE = 'machine'
FORMATS = (HUMAN, MACHINE)

RESULT_MARKS = {
    AttackResult.VULNERABLE: 'V',
    AttackResult.SECURE: 'S',
    AttackResult.INCONCLUSIVE: '?',
}


def _check_format(fmt: str):
    if fmt not in FORMATS:
        raise ConfigurationError(f"Format de rapport inconnu: {fmt} (attendu: {', '.join(FORMATS)})")


def report_document(report: AssessmentReport, show_secrets: bool = False) -> Dict[str, Any]:
    """Forme sérialisable d'un rapport (champs stables du format machine)."""
    schema = AssessmentReportSchema()
    schema.context = {'show_secrets': show_secrets}
    return schema.dump(report)


def _dumps(document: Any) -> bytes:
    return (json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False, default=str) + '\n').encode('utf-8')


def _outcome_lines(outcome: AttackOutcome, show_secrets: bool) -> List[str]:
    lines = ['', f"== {outcome.attack.value}: {outcome.result.value} =="]
    if not outcome.evidence:
        lines.append('  aucune preuve')
    for evidence in outcome.evidence:
        payload = dict(evidence.payload)
        if 'password' in payload and not show_secrets:
            payload['password'] = REDACTED
        details = ', '.join(f"{k}={payload[k]}" for k in sorted(payload))
        side = f"[{evidence.side.value}] " if evidence.side else ''
        lines.append(f"  - {side}{evidence.kind.value}: {details}")
    lines += [f"  note: {note}" for note in outcome.notes]
    if outcome.transcript:
        lines.append(f"  transcription: {outcome.transcript}")
    return lines


def _credential_lines(credentials: List[CapturedCredential], show_secrets: bool) -> List[str]:
    lines = ['', '== Identifiants capturés ==']
    if not credentials:
        lines.append('  aucun')
    for credential in credentials:
        data = credential.to_dict(show_secrets)
        lines.append(f"  {data['username']} / {data['password']} (politique {data['token_policy_uri']}, "
                     f"victime {data['victim_application_uri']})")
    return lines


def _human(report: AssessmentReport, show_secrets: bool) -> str:
    spec = report.scenario
    lines = [
        f"OPC UA TrustKit {report.toolkit_version} - rapport d'évaluation",
        '',
        '== Scénario ==',
        f"  attaque         : {spec.attack.value}",
        f"  profil serveur  : {spec.server_profile.value}"
        + ('' if spec.server_auto_accept else ' (auto_accept=false)'),
        f"  profil client   : {spec.client_profile.value}"
        + ('' if spec.client_auto_accept else ' (auto_accept=false)'),
        f"  authentification: {spec.user_auth.value}",
        f"  graine          : {spec.seed}",
        '',
        '== Résultat ==',
        f"  {report.result.value}",
    ]
    if report.error:
        lines.append(f"  erreur du harnais: {report.error}")
    if report.pitfall_class:
        lines.append(f"  classe ({report.pitfall_class.numeral}) {report.pitfall_class.label}")
    else:
        lines.append('  aucune classe de défaut')

    for outcome in report.outcomes:
        lines += _outcome_lines(outcome, show_secrets)
    lines += _credential_lines(report.credentials, show_secrets)

    if report.findings:
        lines += ['', '== Constats ==']
        for finding in report.findings:
            lines.append(f"  côté {finding['side']} ({finding['profile']}): classe {finding['pitfall']} - "
                         f"{finding['label']}")
    if report.transcripts:
        lines += ['', '== Transcriptions ==']
        lines += [f"  {path}" for path in report.transcripts]
    if report.notes:
        lines += ['', '== Notes ==']
        lines += [f"  {note}" for note in report.notes]
    return '\n'.join(lines) + '\n'


def render_report(report: AssessmentReport, fmt: str = HUMAN, show_secrets: bool = False) -> bytes:
    """
    Rend un rapport en octets.

    Args:
        report: Rapport d'évaluation
        fmt: 'human' ou 'machine'
        show_secrets: Affiche les mots de passe capturés

    Raises:
        ConfigurationError: format inconnu
    """
    _check_format(fmt)
    if fmt == MACHINE:
        return _dumps(report_document(report, show_secrets))
    return _human(report, show_secrets).encode('utf-8')


def render_outcome(outcome: AttackOutcome, fmt: str = HUMAN, show_secrets: bool = False,
                   credentials: Optional[List[CapturedCredential]] = None, version: str = '') -> bytes:
    """Rendu d'une attaque lancée seule (verbes rogue-server, rogue-client, mitm)."""
    _check_format(fmt)
    credentials = credentials or []
    if fmt == MACHINE:
        outcome_schema = AttackOutcomeSchema()
        outcome_schema.context = {'show_secrets': show_secrets}
        credential_schema = CapturedCredentialSchema(many=True)
        credential_schema.context = {'show_secrets': show_secrets}
        return _dumps({
            'toolkit_version': version,
            'outcome': outcome_schema.dump(outcome),
            'captured_credentials': credential_schema.dump(credentials),
            'credentials_redacted': not show_secrets,
        })
    lines = [f"OPC UA TrustKit {version} - {outcome.attack.value}"]
    lines += _outcome_lines(outcome, show_secrets)
    lines += _credential_lines(credentials, show_secrets)
    return ('\n'.join(lines) + '\n').encode('utf-8')


def render_scan(report: ScanReport, fmt: str = HUMAN) -> bytes:
    _check_format(fmt)
    if fmt == MACHINE:
        return _dumps(report.to_dict())
    lines = [f"{len(report.descriptors)} serveur(s) OPC UA, {len(report.failures)} échec(s)"]
    for descriptor in report.descriptors:
        lines.append(f"  ✅ {descriptor.url} {descriptor.application.application_uri} "
                     f"({descriptor.application.application_name.text or '?'})")
        for endpoint in descriptor.endpoints:
            tokens = ', '.join(t.token_type.name for t in endpoint.user_identity_tokens or [])
            lines.append(f"     - {endpoint.security_mode.name} "
                         f"{endpoint.security_policy_uri.rsplit('#', 1)[-1]} [{tokens}]")
    for failure in report.failures:
        lines.append(f"  ❌ {failure.target}: {failure.reason} {failure.detail}".rstrip())
    return ('\n'.join(lines) + '\n').encode('utf-8')


def render_transcript(transcript: Transcript, fmt: str = HUMAN) -> bytes:
    """Liste des enregistrements: sens, horodatage, type de message, taille."""
    _check_format(fmt)
    records = transcript.summary()
    if fmt == MACHINE:
        return _dumps({'label': transcript.label, 'records': records})
    lines = [f"{transcript.label or transcript.locator}: {len(records)} enregistrement(s)"]
    for record in records:
        lines.append(f"  {record['direction']:>3} {record['timestamp']:.6f} {record['message_type']}"
                     f"{record['chunk_flag']} {record['size']} octets")
    return ('\n'.join(lines) + '\n').encode('utf-8')


def matrix_frame(reports: List[AssessmentReport]) -> pd.DataFrame:
    """Une ligne par scénario: attaque, profils, résultat et classe."""
    rows = []
    for report in reports:
        spec = report.scenario
        rows.append({
            'attack': spec.attack.value,
            'server_profile': spec.server_profile.value + ('' if spec.server_auto_accept else '(off)'),
            'client_profile': spec.client_profile.value + ('' if spec.client_auto_accept else '(off)'),
            'result': 'Error' if report.error else report.result.value,
            'pitfall': report.pitfall_class.numeral if report.pitfall_class else '-',
        })
    return pd.DataFrame(rows, columns=['attack', 'server_profile', 'client_profile', 'result', 'pitfall'])


def render_matrix(reports: List[AssessmentReport], fmt: str = HUMAN, show_secrets: bool = False) -> bytes:
    """
    Format humain: tableau croisé (attaque, profil serveur) x profil
    client, cellules « V/i », « S/- », « ?/- ». Format machine: liste des
    documents de rapport.
    """
    _check_format(fmt)
    if fmt == MACHINE:
        return _dumps([report_document(r, show_secrets) for r in reports])

    df = matrix_frame(reports)
    if df.empty:
        return b"Matrice vide\n"
    df['cell'] = [
        ('E' if result == 'Error' else RESULT_MARKS[AttackResult(result)]) + '/' + pitfall
        for result, pitfall in zip(df['result'], df['pitfall'])
    ]
    pivot = df.pivot_table(index=['attack', 'server_profile'], columns='client_profile', values='cell',
                           aggfunc='first', sort=False)
    counts = df['result'].value_counts().sort_index()
    summary = ', '.join(f"{name}={count}" for name, count in counts.items())
    text = (f"Matrice de {len(df)} scénario(s): {summary}\n\n"
            f"{pivot.to_string()}\n\n"
            "V = Vulnerable, S = Secure, ? = Inconclusive, E = erreur; suffixe = classe de défaut\n")
    return text.encode('utf-8')


def write_report(content: bytes, path: Union[str, Path]) -> Path:
    """Écrit un rendu sur disque (dossiers parents créés)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(content)
    size_kb = path.stat().st_size / 1024
    logger.info(f"📄 Rapport écrit: {path} ({size_kb:.1f} KB)")
    return path
