"""
Hiérarchie d'exceptions du laboratoire MHD
==========================================

Toutes les erreurs levées par les modules de calcul héritent de
``MHDLabError``. Les couches d'orchestration (boucle de simulation, CLI)
les interceptent, les journalisent et écrivent le manifeste d'échec.
"""

from typing import Optional, Tuple


class MHDLabError(Exception):
    """Erreur de base du laboratoire"""


class DomainError(MHDLabError, ValueError):
    """Densité ou température non strictement positive"""


class NumericError(MHDLabError, ArithmeticError):
    """
    Valeur NaN/Inf produite par un coefficient, une tendance ou une vitesse d'onde

    Args:
        message (str): Description de l'erreur
        term (str): Terme fautif (ex: 'd_theta', 'mu')
        sample (tuple): Échantillon (rho, theta) ou indice de grille incriminé
    """

    def __init__(self, message: str, term: Optional[str] = None, sample: Optional[Tuple] = None):
        super().__init__(message)
        self.term = term
        self.sample = sample


class StepRejectedError(NumericError):
    """Croissance de plus d'un facteur 10 d'un champ en un seul pas"""


class UsageError(MHDLabError, ValueError):
    """Appel incorrect: forme de tableau, exposant, plage vide, fenêtre incohérente"""


class ConfigError(MHDLabError, ValueError):
    """
    Erreur de configuration, localisée par numéro de ligne quand elle est connue

    Args:
        message (str): Description
        line (int): Numéro de ligne (1-indexé) dans le texte de configuration
    """

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"ligne {line}: {message}"
        super().__init__(message)


class SequenceError(MHDLabError, ValueError):
    """Suite mollifiée invalide (trop de points planchers)"""


class SnapshotError(MHDLabError, IOError):
    """Erreur de lecture d'un instantané binaire"""


class SnapshotMagicError(SnapshotError):
    """Nombre magique invalide"""


class SnapshotVersionError(SnapshotError):
    """Version de format non supportée"""


class SnapshotTruncatedError(SnapshotError):
    """Fichier tronqué"""


class SnapshotGridMismatchError(SnapshotError):
    """Grille de l'instantané différente de la grille attendue"""
