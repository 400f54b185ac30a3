"""
Appraisal - First-layer RAM and internal appraisal

Submodules are imported explicitly (appraisal.ram, appraisal.internal,
...); the package root only carries the affect value type so the world
package can depend on it without a cycle.
"""

from appraisal.affect import AffectVector, SCALE_MAX, SCALE_MID, SCALE_MIN

__all__ = ['AffectVector', 'SCALE_MIN', 'SCALE_MAX', 'SCALE_MID']
