"""polsim: deterministic agent-based human-mobility data generator.

Subpackages by concern: map ingestion (:mod:`polsim.worldmap`), agent needs
and decisions (:mod:`polsim.needs`), routing (:mod:`polsim.mobility`), the
social network (:mod:`polsim.social`), the tick engine
(:mod:`polsim.engine`), log formats (:mod:`polsim.logio`), and the
multi-process fleet orchestrator (:mod:`polsim.fleet`). ``polsim.cli``
exposes all of it as one executable.
"""

__version__ = "0.1.0"
