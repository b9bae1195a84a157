"""commands package – one module per command family."""

from commands.policy import cmd_eval, cmd_parse
from commands.run import cmd_run, cmd_sweep
from commands.tables import cmd_compare, cmd_frontier, cmd_plot_data

__all__ = ["cmd_parse", "cmd_eval", "cmd_run", "cmd_sweep",
           "cmd_compare", "cmd_plot_data", "cmd_frontier"]
