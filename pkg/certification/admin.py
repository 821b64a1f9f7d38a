from django.contrib import admin
from .models import GainCertificate

@admin.register(GainCertificate)
class GainCertificateAdmin(admin.ModelAdmin):
    list_display = ['id', 'scenario', 'passed', 'lambda_V', 'D', 'ultimate_bound', 'created_at']
    list_filter = ['passed', 'created_at']
    search_fields = ['scenario', 'failing']
    readonly_fields = ['created_at', 'report', 'failing_conditions']
    ordering = ['-created_at']

    def failing_conditions(self, obj):
        return ', '.join(obj.failing_conditions) or '-'
    failing_conditions.short_description = 'Failing'
