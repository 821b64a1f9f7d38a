# Generated by Django 5.2.6 on 2026-10-19 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='GainCertificate',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('scenario', models.CharField(max_length=100)),
                ('config_path', models.CharField(blank=True, max_length=500)),
                ('passed', models.BooleanField(default=False)),
                ('lambda_V', models.FloatField()),
                ('D', models.FloatField()),
                ('ultimate_bound', models.FloatField(blank=True, null=True)),
                ('failing', models.CharField(blank=True, max_length=500)),
                ('report', models.JSONField(default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['scenario', 'created_at'], name='cert_scenario_idx')],
            },
        ),
    ]
