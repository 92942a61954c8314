from qvit.cli.commands import qvit_group

__all__ = ("qvit_group",)
