from __future__ import annotations

from .config import SimConfig
from .discovery import NodeState


def inhibitor_protocol(node: NodeState, detected: bool, now: float, config: SimConfig) -> NodeState:
    """Apply the sleep rule at a scan opportunity.

    An awake node that hears the inhibitor sleeps for ``inhibitor_sleep`` seconds; on
    waking it scans again and either goes back to sleep or resumes normal operation.
    A node that is still asleep at ``now`` does not scan.
    """
    if not node.awake(now):
        return node
    if detected:
        node.asleep_until = now + config.inhibitor_sleep
        node.neighbors.clear()
    else:
        node.asleep_until = None
    return node
