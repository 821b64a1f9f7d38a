from django.contrib import admin
from .models import SimulationRun

@admin.register(SimulationRun)
class SimulationRunAdmin(admin.ModelAdmin):
    list_display = ['id', 'scenario', 'command', 'run_mode', 'thrust_strategy', 'final_ex_norm', 'violations', 'exit_code', 'created_at']
    list_filter = ['command', 'run_mode', 'thrust_strategy', 'exit_code', 'created_at']
    search_fields = ['scenario', 'config_path']
    readonly_fields = ['created_at', 'succeeded']
    ordering = ['-created_at']

    def succeeded(self, obj):
        return obj.succeeded
    succeeded.boolean = True
    succeeded.short_description = 'Succeeded'
